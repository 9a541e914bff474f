#pragma once

#include <string_view>
#include <vector>

#include "nf/common.hpp"

namespace nf {

enum class FieldStage { coarse, refined };

std::string_view to_string(FieldStage stage);

// Per-point unit vectors aligned with cloud order.
struct NormalField {
  std::vector<Vec3> vectors;
  FieldStage stage = FieldStage::coarse;

  // Throws InvalidArgument if any vector is more than 1e-6 from unit length.
  void validate() const;
};

}  // namespace nf
