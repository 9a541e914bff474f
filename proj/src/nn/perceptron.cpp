#include "nf/nn/perceptron.hpp"

#include <cmath>

#include "nf/common.hpp"

namespace nf::nn {

using Eigen::MatrixXd;

Perceptron::Perceptron(const std::vector<int>& dims, bool relu_last) : relu_last_(relu_last) {
  if (dims.size() < 2) throw InvalidArgument("perceptron needs input and output dims");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    if (dims[i] < 1 || dims[i + 1] < 1) throw InvalidArgument("perceptron dims must be positive");
    layers_.push_back({MatrixXd::Zero(dims[i + 1], dims[i]), Eigen::VectorXd::Zero(dims[i + 1])});
  }
}

void Perceptron::init_he(std::mt19937_64& rng) {
  for (auto& layer : layers_) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / double(layer.weight.cols())));
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
    layer.bias.setZero();
  }
}

MatrixXd Perceptron::forward(const MatrixXd& x, Cache* cache) const {
  if (x.rows() != input_dim()) throw InvalidArgument("perceptron input dimension mismatch");
  if (cache) {
    cache->inputs.resize(layers_.size());
    cache->pre_activations.resize(layers_.size());
  }
  MatrixXd h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    MatrixXd z = layers_[l].weight * h;
    z.colwise() += layers_[l].bias;
    const bool relu = l + 1 < layers_.size() || relu_last_;
    MatrixXd next = relu ? MatrixXd(z.cwiseMax(0.0)) : z;
    if (cache) {
      cache->inputs[l] = std::move(h);
      cache->pre_activations[l] = std::move(z);
    }
    h = std::move(next);
  }
  return h;
}

MatrixXd Perceptron::backward(const Cache& cache, const MatrixXd& dy, Perceptron& grads) const {
  MatrixXd d = dy;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const bool relu = l + 1 < layers_.size() || relu_last_;
    if (relu) d = d.cwiseProduct((cache.pre_activations[l].array() > 0.0).cast<double>().matrix());
    grads.layers_[l].weight.noalias() += d * cache.inputs[l].transpose();
    grads.layers_[l].bias += d.rowwise().sum();
    d = layers_[l].weight.transpose() * d;
  }
  return d;
}

Perceptron Perceptron::zeros_like() const {
  Perceptron p;
  p.relu_last_ = relu_last_;
  for (const auto& l : layers_) {
    p.layers_.push_back({MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                         Eigen::VectorXd::Zero(l.bias.size())});
  }
  return p;
}

void Perceptron::append_parameters(const std::string& prefix, ParamBlocks& blocks) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    blocks.push_back({prefix + std::to_string(l) + ".weight", as_span(layers_[l].weight)});
    blocks.push_back({prefix + std::to_string(l) + ".bias", as_span(layers_[l].bias)});
  }
}

}  // namespace nf::nn
