#pragma once

#include <optional>
#include <vector>

#include "nf/common.hpp"

namespace nf::pointcloud {

// Maps model units to normalized units: q = (p - centroid) / scale.
struct Transform {
  Vec3 centroid = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return (p - centroid) / scale; }
  Vec3 invert(const Vec3& q) const { return q * scale + centroid; }

  // Transform equivalent to applying *this first, then `next`.
  Transform then(const Transform& next) const {
    return {centroid + scale * next.centroid, scale * next.scale};
  }
};

class PointCloud {
 public:
  // Throws InvalidArgument when the invariants do not hold: non-empty,
  // finite coordinates, normals (if any) unit length and one per point.
  explicit PointCloud(std::vector<Vec3> points,
                      std::optional<std::vector<Vec3>> normals = std::nullopt,
                      Transform transform = {});

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  bool has_normals() const { return normals_.has_value(); }
  const std::vector<Vec3>& normals() const;
  const Transform& transform() const { return transform_; }

  PointCloud with_normals(std::vector<Vec3> normals) const;
  PointCloud without_normals() const;

 private:
  std::vector<Vec3> points_;
  std::optional<std::vector<Vec3>> normals_;
  Transform transform_;
};

// Centers the cloud on its centroid and scales it uniformly so the
// farthest point lies on the unit sphere. The recorded transform composes
// with any transform already present on the input.
PointCloud normalize_cloud(const PointCloud& cloud);

// Axis-aligned bounding box diagonal length.
double bounding_box_diagonal(const PointCloud& cloud);

}  // namespace nf::pointcloud
