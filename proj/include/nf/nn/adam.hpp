#pragma once

#include <vector>

#include <Eigen/Core>

#include "nf/nn/parameters.hpp"

namespace nf::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive moment estimation with bias correction.
class OptimizerState {
 public:
  OptimizerState(AdamConfig config, const ParamBlocks& params);

  // Throws NumericalError naming the first block with a non-finite
  // gradient; parameters are left untouched in that case.
  void step(const ParamBlocks& params, const ParamBlocks& grads);

  long steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  const std::vector<Eigen::VectorXd>& first_moments() const { return m_; }
  const std::vector<Eigen::VectorXd>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  long steps_ = 0;
  std::vector<Eigen::VectorXd> m_;
  std::vector<Eigen::VectorXd> v_;
};

}  // namespace nf::nn
