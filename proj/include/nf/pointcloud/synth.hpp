#pragma once

#include <cstdint>
#include <string_view>

#include "nf/pointcloud/point_cloud.hpp"

namespace nf::pointcloud {

enum class ShapeKind { sphere, cube, torus };

// Throws InvalidArgument for unknown names.
ShapeKind parse_shape_kind(std::string_view name);
std::string_view to_string(ShapeKind kind);

// Unit sphere at the origin; axis-aligned cube of side 1 centered at the
// origin; torus around the z axis with these radii.
inline constexpr double kTorusMajorRadius = 0.7;
inline constexpr double kTorusMinorRadius = 0.25;

// Area-uniform surface samples with analytic outward normals. Model units,
// not normalized. Requires n >= 4.
PointCloud synth_shape(ShapeKind kind, std::size_t n, std::uint64_t seed);

enum class DensityPattern { none, gradient };

DensityPattern parse_density(std::string_view name);

// Adds isotropic Gaussian noise with std = noise_fraction * bbox diagonal.
// The gradient pattern keeps a point with probability rising linearly from
// 0.1 at min x to 1.0 at max x, applied before the noise. Normals of kept
// points are copied unchanged.
PointCloud corrupt(const PointCloud& cloud, double noise_fraction, DensityPattern density,
                   std::uint64_t seed);

}  // namespace nf::pointcloud
