#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "nf/common.hpp"
#include "nf/nn/parameters.hpp"

namespace nf::nn {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

struct MlpShape {
  int input_dim = 3;
  int width = 256;
  int depth = 8;  // number of linear layers
  std::optional<int> skip_at = 4;
};

// Scalar field network: linear layers with ReLU between them (none after
// the last). When skip_at is set, the input of that layer is the previous
// activation concatenated with the raw input, scaled by 1/sqrt(2).
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(const MlpShape& shape);  // zero parameters
  Mlp(std::vector<DenseLayer> layers, std::optional<int> skip_at);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  std::optional<int> skip_at() const { return skip_at_; }
  int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
  std::size_t depth() const { return layers_.size(); }

  // Descriptor used by checkpoints: [input_dim, width, depth, skip_at or -1].
  MlpShape shape() const;

  Mlp zeros_like() const;
  ParamBlocks parameters();
  std::size_t parameter_count() const;

 private:
  void validate() const;

  std::vector<DenseLayer> layers_;
  std::optional<int> skip_at_;
};

inline constexpr double kSkipScale = 0.70710678118654752440;

// Recorded primal values of a batched forward pass, and (optionally) the
// forward-mode tangents d(.)/dx_c for the three input axes. Columns are
// batch entries; tangent matrices hold the three axes as consecutive
// column blocks of width B.
struct Tape {
  Eigen::MatrixXd input;                        // 3 x B
  std::vector<Eigen::MatrixXd> layer_inputs;    // u_l
  std::vector<Eigen::MatrixXd> pre_activations; // z_l
  std::vector<Eigen::MatrixXd> tangent_inputs;  // mu_l, in_l x 3B
  bool has_tangents = false;
  Eigen::RowVectorXd value;   // f, 1 x B
  Eigen::Matrix3Xd gradient;  // grad_x f, 3 x B

  std::size_t batch() const { return static_cast<std::size_t>(input.cols()); }
};

// f(x) for one point. Throws InvalidArgument on non-finite input and
// NumericalError on non-finite output.
double forward(const Mlp& net, const Vec3& x);

// Batched forward; records into `tape` when given.
Eigen::RowVectorXd forward(const Mlp& net, const Eigen::Matrix3Xd& x, Tape* tape = nullptr);

// Re-evaluates the network from the tape's recorded input.
Eigen::RowVectorXd replay(const Mlp& net, const Tape& tape);

// Analytic grad_x f. ReLU kinks use the mask z > 0.
Vec3 input_gradient(const Mlp& net, const Vec3& x);

struct FieldEval {
  Eigen::RowVectorXd value;
  Eigen::Matrix3Xd gradient;
};

// f and grad_x f for a batch, recording both passes into `tape`.
FieldEval evaluate_with_gradient(const Mlp& net, const Eigen::Matrix3Xd& x, Tape* tape = nullptr);

// dLoss/df and dLoss/d(grad_x f) per batch entry.
struct FieldAdjoint {
  Eigen::RowVectorXd value;
  Eigen::Matrix3Xd gradient;
};

// Reverse pass through a tape recorded by evaluate_with_gradient(). The
// gradient adjoint flows through the recorded tangent computation, which
// gives the second-order contribution; ReLU masks are held constant.
// Accumulates into `grads` (same shape as net).
void backward(const Mlp& net, const Tape& tape, const FieldAdjoint& adjoint, Mlp& grads);

// Plain first-order reverse pass w.r.t. f only (tape may lack tangents).
void backward_value(const Mlp& net, const Tape& tape, const Eigen::RowVectorXd& d_value,
                    Mlp& grads);

// A scalar loss over (f, grad_x f) that also fills in its adjoint.
using FieldLoss = std::function<double(const FieldEval&, FieldAdjoint&)>;

struct LossGradients {
  double loss = 0.0;
  Mlp grads;
};

LossGradients loss_gradients(const Mlp& net, const Eigen::Matrix3Xd& x, const FieldLoss& loss);

// Geometric initialization: f(x) ~ |x| - radius for a ReLU network of the
// given shape, so the initial gradient field points outward.
Mlp init_geometric(const MlpShape& shape, std::uint64_t seed, double radius = 0.5);

// He-normal hidden layers, zero biases.
Mlp init_plain(const MlpShape& shape, std::uint64_t seed);

}  // namespace nf::nn
