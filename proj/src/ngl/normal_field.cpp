#include "nf/ngl/normal_field.hpp"

#include <cmath>
#include <string>

namespace nf {

std::string_view to_string(FieldStage stage) {
  return stage == FieldStage::coarse ? "coarse" : "refined";
}

void NormalField::validate() const {
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (!vectors[i].allFinite() || std::abs(vectors[i].norm() - 1.0) > 1e-6) {
      throw InvalidArgument("field vector " + std::to_string(i) + " is not unit length");
    }
  }
}

}  // namespace nf
