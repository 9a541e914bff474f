#include "nf/pointcloud/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nf::pointcloud {

namespace {

void check_normals(const std::vector<Vec3>& normals, std::size_t n) {
  if (normals.size() != n) {
    throw InvalidArgument("normal count " + std::to_string(normals.size()) +
                          " does not match point count " + std::to_string(n));
  }
  for (std::size_t i = 0; i < normals.size(); ++i) {
    if (!normals[i].allFinite() || std::abs(normals[i].norm() - 1.0) > 1e-6) {
      throw InvalidArgument("normal " + std::to_string(i) + " is not unit length");
    }
  }
}

}  // namespace

PointCloud::PointCloud(std::vector<Vec3> points, std::optional<std::vector<Vec3>> normals,
                       Transform transform)
    : points_(std::move(points)), normals_(std::move(normals)), transform_(transform) {
  if (points_.empty()) throw InvalidArgument("point cloud is empty");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!points_[i].allFinite()) {
      throw InvalidArgument("point " + std::to_string(i) + " has non-finite coordinates");
    }
  }
  if (normals_) check_normals(*normals_, points_.size());
  if (!(transform_.scale > 0.0) || !transform_.centroid.allFinite()) {
    throw InvalidArgument("invalid normalization transform");
  }
}

const std::vector<Vec3>& PointCloud::normals() const {
  if (!normals_) throw InvalidArgument("point cloud has no normals");
  return *normals_;
}

PointCloud PointCloud::with_normals(std::vector<Vec3> normals) const {
  return PointCloud(points_, std::move(normals), transform_);
}

PointCloud PointCloud::without_normals() const {
  return PointCloud(points_, std::nullopt, transform_);
}

PointCloud normalize_cloud(const PointCloud& cloud) {
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : cloud.points()) centroid += p;
  centroid /= static_cast<double>(cloud.size());

  double scale = 0.0;
  for (const auto& p : cloud.points()) scale = std::max(scale, (p - centroid).norm());
  if (!(scale > 0.0)) throw NumericalError("cannot normalize: all points are identical");

  const Transform step{centroid, scale};
  std::vector<Vec3> points;
  points.reserve(cloud.size());
  for (const auto& p : cloud.points()) points.push_back(step.apply(p));

  std::optional<std::vector<Vec3>> normals;
  if (cloud.has_normals()) normals = cloud.normals();
  return PointCloud(std::move(points), std::move(normals), cloud.transform().then(step));
}

double bounding_box_diagonal(const PointCloud& cloud) {
  Vec3 lo = cloud.point(0), hi = cloud.point(0);
  for (const auto& p : cloud.points()) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

}  // namespace nf::pointcloud
