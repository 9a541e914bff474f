#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nf::nn {

// Named view over one contiguous parameter array owned by a network.
struct ParamBlock {
  std::string name;
  std::span<double> values;
};

using ParamBlocks = std::vector<ParamBlock>;

inline std::span<double> as_span(Eigen::MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
inline std::span<double> as_span(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

inline std::size_t total_size(const ParamBlocks& blocks) {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.values.size();
  return n;
}

// Flattens all blocks in order.
std::vector<double> flatten(const ParamBlocks& blocks);

// Inverse of flatten(); throws InvalidArgument on size mismatch.
void assign(const ParamBlocks& blocks, std::span<const double> flat);

}  // namespace nf::nn
