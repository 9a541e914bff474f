#include "nf/nn/mlp.hpp"

#include <cmath>

#include <Eigen/QR>
#include <numbers>
#include <random>
#include <string>

namespace nf::nn {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;

namespace {

int layer_input_dim(const MlpShape& s, int layer) {
  if (layer == 0) return s.input_dim;
  return s.width + ((s.skip_at && *s.skip_at == layer) ? s.input_dim : 0);
}

int layer_output_dim(const MlpShape& s, int layer) { return layer + 1 == s.depth ? 1 : s.width; }

void check_shape(const MlpShape& s) {
  if (s.input_dim < 1 || s.width < 1 || s.depth < 1) throw InvalidArgument("invalid MLP shape");
  if (s.skip_at && (*s.skip_at < 1 || *s.skip_at >= s.depth)) {
    throw InvalidArgument("skip layer out of range");
  }
}

// Tangent seed: identity directions, one column block per input axis.
MatrixXd tangent_seed(int dim, Eigen::Index batch) {
  MatrixXd seed = MatrixXd::Zero(dim, dim * batch);
  for (int c = 0; c < dim; ++c) seed.row(c).segment(c * batch, batch).setOnes();
  return seed;
}

MatrixXd relu_mask(const MatrixXd& z) { return (z.array() > 0.0).cast<double>().matrix(); }

}  // namespace

Mlp::Mlp(const MlpShape& shape) : skip_at_(shape.skip_at) {
  check_shape(shape);
  for (int l = 0; l < shape.depth; ++l) {
    layers_.push_back({MatrixXd::Zero(layer_output_dim(shape, l), layer_input_dim(shape, l)),
                       Eigen::VectorXd::Zero(layer_output_dim(shape, l))});
  }
}

Mlp::Mlp(std::vector<DenseLayer> layers, std::optional<int> skip_at)
    : layers_(std::move(layers)), skip_at_(skip_at) {
  validate();
}

void Mlp::validate() const {
  if (layers_.empty()) throw InvalidArgument("MLP needs at least one layer");
  const auto in = layers_.front().weight.cols();
  if (skip_at_ && (*skip_at_ < 1 || *skip_at_ >= static_cast<int>(layers_.size()))) {
    throw InvalidArgument("skip layer out of range");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows()) {
      throw InvalidArgument("layer " + std::to_string(l) + ": bias size mismatch");
    }
    if (l > 0) {
      auto expected = layers_[l - 1].weight.rows();
      if (skip_at_ && *skip_at_ == static_cast<int>(l)) expected += in;
      if (layer.weight.cols() != expected) {
        throw InvalidArgument("layer " + std::to_string(l) + ": input dimension mismatch");
      }
    }
  }
  if (layers_.back().weight.rows() != 1) throw InvalidArgument("MLP output must be scalar");
}

MlpShape Mlp::shape() const {
  MlpShape s;
  s.input_dim = input_dim();
  s.depth = static_cast<int>(layers_.size());
  s.width = layers_.size() > 1 ? static_cast<int>(layers_.front().weight.rows()) : 1;
  s.skip_at = skip_at_;
  return s;
}

Mlp Mlp::zeros_like() const {
  std::vector<DenseLayer> zero;
  zero.reserve(layers_.size());
  for (const auto& l : layers_) {
    zero.push_back({MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                    Eigen::VectorXd::Zero(l.bias.size())});
  }
  return Mlp(std::move(zero), skip_at_);
}

ParamBlocks Mlp::parameters() {
  ParamBlocks blocks;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    blocks.push_back({"layer" + std::to_string(l) + ".weight", as_span(layers_[l].weight)});
    blocks.push_back({"layer" + std::to_string(l) + ".bias", as_span(layers_[l].bias)});
  }
  return blocks;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

namespace {

void run_forward(const Mlp& net, const Eigen::Matrix3Xd& x, bool tangents, Tape& tape) {
  if (!x.allFinite()) throw InvalidArgument("non-finite network input");
  if (x.rows() != net.input_dim()) throw InvalidArgument("input dimension mismatch");
  const auto batch = x.cols();
  const auto& layers = net.layers();
  const auto depth = layers.size();
  const auto skip = net.skip_at();

  tape.input = x;
  tape.has_tangents = tangents;
  tape.layer_inputs.assign(depth, {});
  tape.pre_activations.assign(depth, {});
  tape.tangent_inputs.assign(tangents ? depth : 0, {});

  MatrixXd u = x;
  MatrixXd mu;
  MatrixXd seed;
  if (tangents) {
    seed = tangent_seed(net.input_dim(), batch);
    mu = seed;
  }
  for (std::size_t l = 0; l < depth; ++l) {
    if (skip && static_cast<std::size_t>(*skip) == l) {
      MatrixXd cat(u.rows() + x.rows(), batch);
      cat << u, x;
      u = cat * kSkipScale;
      if (tangents) {
        MatrixXd tcat(mu.rows() + seed.rows(), mu.cols());
        tcat << mu, seed;
        mu = tcat * kSkipScale;
      }
    }
    MatrixXd z = layers[l].weight * u;
    z.colwise() += layers[l].bias;
    MatrixXd tau;
    if (tangents) tau = layers[l].weight * mu;

    tape.layer_inputs[l] = std::move(u);
    if (tangents) tape.tangent_inputs[l] = std::move(mu);

    if (l + 1 < depth) {
      u = z.cwiseMax(0.0);
      if (tangents) {
        const MatrixXd mask = relu_mask(z);
        mu.resize(tau.rows(), tau.cols());
        for (int c = 0; c < net.input_dim(); ++c) {
          mu.middleCols(c * batch, batch) = tau.middleCols(c * batch, batch).cwiseProduct(mask);
        }
      }
    } else {
      tape.value = z.row(0);
      if (tangents) {
        tape.gradient.resize(3, batch);
        for (int c = 0; c < 3; ++c) tape.gradient.row(c) = tau.row(0).segment(c * batch, batch);
      }
    }
    tape.pre_activations[l] = std::move(z);
  }
  if (!tape.value.allFinite()) throw NumericalError("non-finite network output");
}

}  // namespace

double forward(const Mlp& net, const Vec3& x) {
  Tape tape;
  run_forward(net, Eigen::Matrix3Xd(x), false, tape);
  return tape.value(0);
}

RowVectorXd forward(const Mlp& net, const Eigen::Matrix3Xd& x, Tape* tape) {
  Tape local;
  Tape& t = tape ? *tape : local;
  run_forward(net, x, false, t);
  return t.value;
}

RowVectorXd replay(const Mlp& net, const Tape& tape) {
  Tape fresh;
  run_forward(net, tape.input, false, fresh);
  return fresh.value;
}

Vec3 input_gradient(const Mlp& net, const Vec3& x) {
  Tape tape;
  run_forward(net, Eigen::Matrix3Xd(x), true, tape);
  return tape.gradient.col(0);
}

FieldEval evaluate_with_gradient(const Mlp& net, const Eigen::Matrix3Xd& x, Tape* tape) {
  Tape local;
  Tape& t = tape ? *tape : local;
  run_forward(net, x, true, t);
  return {t.value, t.gradient};
}

void backward(const Mlp& net, const Tape& tape, const FieldAdjoint& adjoint, Mlp& grads) {
  if (!tape.has_tangents) throw InvalidArgument("tape was recorded without tangents");
  const auto batch = static_cast<Eigen::Index>(tape.batch());
  const auto& layers = net.layers();
  auto& g = grads.layers();
  const auto skip = net.skip_at();
  const int in_dim = net.input_dim();

  MatrixXd dz = adjoint.value;
  MatrixXd dtau(1, in_dim * batch);
  for (int c = 0; c < in_dim; ++c) dtau.row(0).segment(c * batch, batch) = adjoint.gradient.row(c);

  for (std::size_t l = layers.size(); l-- > 0;) {
    g[l].weight.noalias() += dz * tape.layer_inputs[l].transpose();
    g[l].weight.noalias() += dtau * tape.tangent_inputs[l].transpose();
    g[l].bias += dz.rowwise().sum();
    if (l == 0) break;

    MatrixXd du = layers[l].weight.transpose() * dz;
    MatrixXd dmu = layers[l].weight.transpose() * dtau;
    if (skip && static_cast<std::size_t>(*skip) == l) {
      const auto width = du.rows() - in_dim;
      du = (du.topRows(width) * kSkipScale).eval();
      dmu = (dmu.topRows(width) * kSkipScale).eval();
    }
    const MatrixXd mask = relu_mask(tape.pre_activations[l - 1]);
    dz = du.cwiseProduct(mask);
    dtau.resize(dmu.rows(), dmu.cols());
    for (int c = 0; c < in_dim; ++c) {
      dtau.middleCols(c * batch, batch) = dmu.middleCols(c * batch, batch).cwiseProduct(mask);
    }
  }
}

void backward_value(const Mlp& net, const Tape& tape, const RowVectorXd& d_value, Mlp& grads) {
  const auto& layers = net.layers();
  auto& g = grads.layers();
  const auto skip = net.skip_at();
  MatrixXd dz = d_value;
  for (std::size_t l = layers.size(); l-- > 0;) {
    g[l].weight.noalias() += dz * tape.layer_inputs[l].transpose();
    g[l].bias += dz.rowwise().sum();
    if (l == 0) break;
    MatrixXd du = layers[l].weight.transpose() * dz;
    if (skip && static_cast<std::size_t>(*skip) == l) {
      du = (du.topRows(du.rows() - net.input_dim()) * kSkipScale).eval();
    }
    dz = du.cwiseProduct(relu_mask(tape.pre_activations[l - 1]));
  }
}

LossGradients loss_gradients(const Mlp& net, const Eigen::Matrix3Xd& x, const FieldLoss& loss) {
  Tape tape;
  const FieldEval eval = evaluate_with_gradient(net, x, &tape);
  FieldAdjoint adjoint{RowVectorXd::Zero(x.cols()), Eigen::Matrix3Xd::Zero(3, x.cols())};
  LossGradients out{loss(eval, adjoint), net.zeros_like()};
  if (!std::isfinite(out.loss)) throw NumericalError("non-finite loss");
  backward(net, tape, adjoint, out.grads);
  return out;
}

Mlp init_geometric(const MlpShape& shape, std::uint64_t seed, double radius) {
  check_shape(shape);
  if (shape.input_dim != 3) throw InvalidArgument("geometric init needs 3-D input");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Mlp net(shape);
  auto& layers = net.layers();
  const auto width = shape.width;

  // Random rotation of a Fibonacci sphere: near-uniform unit directions.
  Eigen::Matrix3d rotation;
  {
    Eigen::Matrix3d a;
    for (int i = 0; i < 9; ++i) a.data()[i] = gauss(rng);
    Eigen::HouseholderQR<Eigen::Matrix3d> qr(a);
    rotation = qr.householderQ();
  }
  // With units relu(w_i . x) over near-uniform directions w_i, the sum
  // sum_i relu(w_i . x) ~ (width / 4) |x|. Hidden layers pass the units
  // through unchanged and the last layer averages them.
  constexpr double golden = 2.39996322972865332;  // pi (3 - sqrt 5)
  if (layers.size() == 1) {
    layers[0].bias.setConstant(-radius);  // no hidden units: constant field
    return net;
  }
  for (int i = 0; i < width; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / width;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 dir(r * std::cos(golden * i), r * std::sin(golden * i), z);
    layers[0].weight.row(i) = (rotation * dir).transpose();
  }
  const double jitter = 1e-3 / std::sqrt(double(width));
  for (std::size_t l = 1; l + 1 < layers.size(); ++l) {
    auto& w = layers[l].weight;
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = jitter * gauss(rng);
    const double diag = (shape.skip_at && static_cast<std::size_t>(*shape.skip_at) == l) ? 1.0 / kSkipScale : 1.0;
    for (int i = 0; i < width; ++i) w(i, i) += diag;
  }
  auto& last = layers.back();
  const double gain = (shape.skip_at && static_cast<std::size_t>(*shape.skip_at) + 1 == layers.size())
                          ? 4.0 / (width * kSkipScale)
                          : 4.0 / width;
  for (Eigen::Index i = 0; i < last.weight.cols(); ++i) {
    last.weight(0, i) = i < width ? gain * (1.0 + jitter * gauss(rng)) : 0.0;
  }
  last.bias.setConstant(-radius);
  return net;
}

Mlp init_plain(const MlpShape& shape, std::uint64_t seed) {
  check_shape(shape);
  std::mt19937_64 rng(seed);
  Mlp net(shape);
  for (auto& layer : net.layers()) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / double(layer.weight.cols())));
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
    layer.bias.setZero();
  }
  return net;
}

}  // namespace nf::nn
