#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nf/nn/mlp.hpp"
#include "nf/nn/parameters.hpp"

namespace nf::nn {

// Stack of dense layers applied column-wise to a feature matrix, ReLU
// between layers and optionally after the last one.
class Perceptron {
 public:
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> pre_activations;
  };

  Perceptron() = default;
  // dims = {in, h1, ..., out}.
  Perceptron(const std::vector<int>& dims, bool relu_last);

  void init_he(std::mt19937_64& rng);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;

  // Returns dL/dx; accumulates parameter gradients into `grads`.
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& dy, Perceptron& grads) const;

  Perceptron zeros_like() const;
  void append_parameters(const std::string& prefix, ParamBlocks& blocks);

  int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  bool relu_last() const { return relu_last_; }

 private:
  std::vector<DenseLayer> layers_;
  bool relu_last_ = false;
};

}  // namespace nf::nn
