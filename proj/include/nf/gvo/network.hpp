#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "nf/gvo/patch.hpp"
#include "nf/nn/parameters.hpp"
#include "nf/nn/perceptron.hpp"

namespace nf::gvo {

struct GvoShape {
  int m = 700;
  std::vector<int> kernel_widths{64, 128, 256};
  int score_hidden = 64;
  std::vector<int> angle_hidden{256, 128};
  bool use_score = true;
  bool use_kernel_weight = true;

  // Neighbor counts entering each kernel layer plus the final count:
  // m, m/2, m/4, ...
  std::vector<int> neighbor_schedule() const;
  void validate() const;
};

// x'_l = gamma(x_l, beta(MAX_j alpha(m * w_j * x_j))), l < m'.
// alpha's input is scaled by the neighbor count so uniform weights leave
// features unchanged.
struct KernelLayer {
  nn::Perceptron alpha;
  nn::Perceptron beta;
  nn::Perceptron gamma;
  Eigen::VectorXd theta = Eigen::VectorXd::Ones(2);  // theta1, theta2

  struct Cache {
    Eigen::MatrixXd input;
    Eigen::VectorXd distances;
    Eigen::VectorXd d;
    Eigen::VectorXd w;
    double d_sum = 0.0;
    std::vector<Eigen::Index> argmax;
    Eigen::MatrixXd pooled_in;
    nn::Perceptron::Cache alpha, beta, gamma;
  };

  // Pooled term beta(MAX{...}) over all columns of `features`.
  Eigen::VectorXd pooled(const Eigen::MatrixXd& features, const Eigen::VectorXd& distances,
                         bool use_weight, Cache* cache = nullptr) const;

  // Columns must be ordered nearest first; keeps the first `keep`.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& features, const Eigen::VectorXd& distances,
                          int keep, bool use_weight, Cache* cache = nullptr) const;

  // Returns dL/dfeatures; accumulates into grads (including theta).
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& dout, bool use_weight,
                           KernelLayer& grads) const;
};

struct PatchEncoding {
  Eigen::MatrixXd features;  // c x m_L, per retained neighbor
  Eigen::VectorXd scores;    // m_L inlier scores in [0, 1]
  Eigen::VectorXd pooled;    // MAX over score-gated features
};

class GvoNetwork {
 public:
  struct Cache {
    std::vector<KernelLayer::Cache> layers;
    nn::Perceptron::Cache score;
    Eigen::MatrixXd gated;
    std::vector<Eigen::Index> argmax;
  };
  struct AngleCache {
    Eigen::MatrixXd candidates;
    Eigen::MatrixXd z1;
    nn::Perceptron::Cache rest;
    Eigen::RowVectorXd squashed;  // sigmoid of the head output
  };

  GvoNetwork() = default;
  // Zero parameters, theta = 1.
  explicit GvoNetwork(const GvoShape& shape);

  void init_he(std::uint64_t seed);

  PatchEncoding encode(const NeighborPatch& patch, Cache* cache = nullptr) const;

  // Predicted angle in [0, pi] per candidate column.
  Eigen::RowVectorXd predict_angles(const Eigen::VectorXd& pooled,
                                    const Eigen::Matrix3Xd& candidates,
                                    AngleCache* cache = nullptr) const;

  // Backward through the angle head; returns dL/dpooled.
  Eigen::VectorXd backward_angles(const Eigen::VectorXd& pooled, const AngleCache& cache,
                                  const Eigen::RowVectorXd& dangles, GvoNetwork& grads) const;

  // Backward through the encoder given adjoints of scores and pooled.
  void backward_encoding(const Cache& cache, const PatchEncoding& enc,
                         const Eigen::VectorXd& dscores, const Eigen::VectorXd& dpooled,
                         GvoNetwork& grads) const;

  GvoNetwork zeros_like() const;
  nn::ParamBlocks parameters();
  std::size_t parameter_count();

  const GvoShape& shape() const { return shape_; }
  std::vector<KernelLayer>& layers() { return layers_; }
  const std::vector<KernelLayer>& layers() const { return layers_; }
  nn::Perceptron& score_head() { return score_; }
  nn::DenseLayer& angle_first() { return angle_first_; }
  nn::Perceptron& angle_rest() { return angle_rest_; }

 private:
  GvoShape shape_;
  std::vector<KernelLayer> layers_;
  nn::Perceptron score_;
  nn::DenseLayer angle_first_;  // acts on [pooled; candidate]
  nn::Perceptron angle_rest_;
};

// Descriptor: [m, L, widths..., score_hidden, A, angle_hidden..., use_score,
// use_kernel_weight].
void save_gvo(const std::filesystem::path& path, GvoNetwork& net);
GvoNetwork load_gvo(const std::filesystem::path& path);

}  // namespace nf::gvo
