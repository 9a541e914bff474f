#include "nf/nn/parameters.hpp"

#include <algorithm>

#include "nf/common.hpp"

namespace nf::nn {

std::vector<double> flatten(const ParamBlocks& blocks) {
  std::vector<double> flat;
  flat.reserve(total_size(blocks));
  for (const auto& b : blocks) flat.insert(flat.end(), b.values.begin(), b.values.end());
  return flat;
}

void assign(const ParamBlocks& blocks, std::span<const double> flat) {
  if (flat.size() != total_size(blocks)) {
    throw InvalidArgument("parameter count mismatch: expected " +
                          std::to_string(total_size(blocks)) + ", got " +
                          std::to_string(flat.size()));
  }
  std::size_t offset = 0;
  for (const auto& b : blocks) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), b.values.size(),
                b.values.begin());
    offset += b.values.size();
  }
}

}  // namespace nf::nn
