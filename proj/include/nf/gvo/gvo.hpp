#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "nf/gvo/network.hpp"
#include "nf/gvo/patch.hpp"
#include "nf/gvo/sampling.hpp"
#include "nf/ngl/normal_field.hpp"
#include "nf/nn/adam.hpp"
#include "nf/pointcloud/point_cloud.hpp"

namespace nf::gvo {

struct GvoConfig {
  GvoShape shape;
  std::size_t train_vectors = 500;  // M2
  std::size_t test_vectors = 4000;  // M3
  double eta = 0.4;
  double lambda = 0.5;
  // Drop test candidates with v . v0 <= 0.
  bool filter_hemisphere = false;

  std::size_t epochs = 50;
  std::size_t patches_per_shape = 200;  // per epoch
  std::size_t batch_patches = 8;
  nn::AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
  // Learning rate at the last epoch relative to the first; geometric decay
  // in between.
  double lr_final_ratio = 0.1;

  static GvoConfig desk();
  void validate() const;
};

struct GvoLosses {
  double score = 0.0;  // L1
  double angle = 0.0;  // L2
  double total = 0.0;  // L1 + lambda L2, or lambda L2 without scores
};

GvoLosses gvo_objective(const Eigen::VectorXd& scores, const Eigen::VectorXd& delta,
                        const Eigen::RowVectorXd& predicted, const Eigen::RowVectorXd& target,
                        double lambda, bool use_score);

// L1 = MSE(s, delta) over the retained neighbors, L2 = MAE(angle, <v, n>).
// When grads is given, parameter gradients of `total` are accumulated.
GvoLosses gvo_losses(const GvoNetwork& net, const NeighborPatch& patch,
                     const Eigen::Matrix3Xd& candidates, const Vec3& normal,
                     const GvoConfig& cfg, GvoNetwork* grads = nullptr);

struct GvoLog {
  // Entry 0 is the loss before any update, entry e the mean training loss
  // of epoch e.
  std::vector<double> epoch_loss;
  std::vector<double> epoch_score;
  std::vector<double> epoch_angle;
  std::vector<double> wall_ms;
};

struct GvoResult {
  GvoNetwork net;
  GvoLog log;
};

using GvoProgress = std::function<void(std::size_t epoch, double loss)>;

// Every cloud needs ground-truth normals.
GvoResult train_gvo(std::span<const pointcloud::PointCloud> dataset, const GvoConfig& cfg,
                    std::uint64_t seed, const GvoProgress& progress = {});

// Predicts one angle per candidate column.
using AngleScorer = std::function<Eigen::VectorXd(const Eigen::Matrix3Xd&)>;

struct Refinement {
  Vec3 vector = Vec3::Zero();
  std::size_t candidate = 0;
  double predicted = 0.0;
};

// Argmin of the predicted angle over the test candidates around v0; ties go
// to the lowest candidate index.
Refinement refine_normal(const AngleScorer& scorer, const Vec3& v0, const GvoConfig& cfg,
                         std::uint64_t seed);
Refinement refine_normal(const GvoNetwork& net, const NeighborPatch& patch, const Vec3& v0,
                         const GvoConfig& cfg, std::uint64_t seed);

// Refines the listed points only; point i always uses stream i of `seed`,
// so results do not depend on which other points are processed.
std::vector<Vec3> refine_points(const GvoNetwork& net, const pointcloud::SpatialIndex& index,
                                const NormalField& coarse,
                                std::span<const std::size_t> points, const GvoConfig& cfg,
                                std::uint64_t seed);

NormalField refine_field(const GvoNetwork& net, const pointcloud::PointCloud& cloud,
                              const NormalField& coarse, const GvoConfig& cfg,
                              std::uint64_t seed);

}  // namespace nf::gvo
