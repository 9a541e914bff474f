#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "nf/common.hpp"
#include "nf/ngl/normal_field.hpp"
#include "nf/pointcloud/point_cloud.hpp"

namespace nf::eval {

// Unit minimizer of sum (x_j . n)^2 over the given vectors: the eigenvector
// of the smallest eigenvalue of sum x_j x_j^T. The sign is fixed so the
// first non-zero component is positive; when the smallest eigenvalue is
// repeated, the lexicographically largest of the tied eigenvectors wins.
// Throws InvalidArgument on fewer than 3 vectors or a collinear patch.
Vec3 pca_normal(const Eigen::Matrix3Xd& patch);

// PCA over the k nearest neighbors of every point, centered at their mean.
NormalField pca_normals(const pointcloud::PointCloud& cloud, std::size_t k = 24);

struct MstConfig {
  std::size_t k = 12;
};

// Sign propagation along a minimum spanning tree of the k-NN graph with
// weights 1 - |n_i . n_j|. Each connected component is rooted at its
// highest-z point, whose normal is made to point towards +z.
NormalField mst_orient(const pointcloud::PointCloud& cloud, const NormalField& field,
                       const MstConfig& cfg = {});

struct FlipCase {
  Vec3 n1;   // already oriented parent
  Vec3 n2;   // unoriented child estimate
  Vec3 gt2;  // true child normal
};

struct FlipVerdict {
  bool flipped = false;
  Vec3 n2 = Vec3::Zero();  // after the rule
  bool correct = false;    // angle(n2, gt2) < 90 deg
};

// The naive rule: flip n2 when n1 . n2 < 0.
std::vector<FlipVerdict> flip_rule_table(std::span<const FlipCase> cases);

struct FlipSweep {
  std::vector<FlipCase> cases;
  std::vector<FlipVerdict> verdicts;
  std::size_t failures = 0;
  double failure_rate = 0.0;
};

// Two points on a curve whose true normals are `bend_deg` apart, parent
// normal off by `parent_error_deg`, child estimate with either sign.
// Sweeps bend 0..180 and parent error 0..60 in `step_deg` steps.
FlipSweep flip_rule_sweep(double step_deg = 5.0);

// PLY with per-vertex colors from blue (0 deg) to red (>= 90 deg) and a
// comment "RMSE=<value>".
void export_error_map(const pointcloud::PointCloud& cloud, std::span<const double> errors,
                      const std::filesystem::path& path);

}  // namespace nf::eval
