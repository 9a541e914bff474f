#include "nf/nn/adam.hpp"

#include <cmath>

#include "nf/common.hpp"

namespace nf::nn {

OptimizerState::OptimizerState(AdamConfig config, const ParamBlocks& params) : config_(config) {
  for (const auto& b : params) {
    m_.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.values.size())));
    v_.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.values.size())));
  }
}

void OptimizerState::step(const ParamBlocks& params, const ParamBlocks& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw InvalidArgument("optimizer: parameter block count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].values.size() != static_cast<std::size_t>(m_[i].size()) ||
        grads[i].values.size() != params[i].values.size()) {
      throw InvalidArgument("optimizer: shape mismatch in block " + params[i].name);
    }
    for (double g : grads[i].values) {
      if (!std::isfinite(g)) throw NumericalError("non-finite gradient in block " + params[i].name);
    }
  }

  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, double(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, double(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::Map<Eigen::VectorXd> p(params[i].values.data(), m_[i].size());
    Eigen::Map<const Eigen::VectorXd> g(grads[i].values.data(), m_[i].size());
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseAbs2();
    p.array() -= config_.learning_rate * (m_[i].array() / c1) /
                 ((v_[i].array() / c2).sqrt() + config_.epsilon);
  }
}

}  // namespace nf::nn
