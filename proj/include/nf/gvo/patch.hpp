#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "nf/common.hpp"
#include "nf/pointcloud/spatial_index.hpp"

namespace nf::gvo {

// The m nearest neighbors of a center point (the center included, first),
// centered at the center and divided by the farthest neighbor distance.
// Columns are ordered nearest first.
struct NeighborPatch {
  std::size_t center = 0;
  std::vector<std::size_t> indices;
  Eigen::Matrix3Xd coords;
  Eigen::VectorXd distances;  // column norms of coords
  double scale = 1.0;

  std::size_t size() const { return indices.size(); }
};

// Warns once per call when the cloud has fewer than m points. Throws
// NumericalError when every neighbor coincides with the center.
NeighborPatch build_patch(const pointcloud::SpatialIndex& index, std::size_t center, std::size_t m);

// w_j = d_j / sum(d), d_j = sigmoid(theta1 - theta2 * r_j). The sum is taken
// over the sorted values, so the result does not depend on input order.
Eigen::VectorXd kernel_weights(const Eigen::VectorXd& distances, double theta1, double theta2);

// max(0.05^2, 0.3 * mean((x_i . n)^2))
double delta_rho(const Eigen::Matrix3Xd& coords, const Vec3& normal);

// exp(-(x_i . n)^2 / rho^2), one per column.
Eigen::VectorXd delta_targets(const Eigen::Matrix3Xd& coords, const Vec3& normal);

// Angle in [0, pi] between two non-zero vectors.
double angle_between(const Vec3& a, const Vec3& b);

}  // namespace nf::gvo
