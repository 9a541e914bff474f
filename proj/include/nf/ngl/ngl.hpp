#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "nf/ngl/normal_field.hpp"
#include "nf/nn/adam.hpp"
#include "nf/nn/mlp.hpp"
#include "nf/pointcloud/point_cloud.hpp"
#include "nf/pointcloud/spatial_index.hpp"

namespace nf::ngl {

// Algebraically identical residual forms, with v = grad f / |grad f|:
//   ngl_eq6:       f v - (x - mean of k nearest points)
//   extension_eq8: (f v - x) + mean of k nearest points
//   pull_eq4:      x - f v - nearest point (k fixed to 1)
enum class LossVariant { ngl_eq6, extension_eq8, pull_eq4 };
enum class DistanceKind { l2, l1, mse };
enum class InitKind { geometric, plain };

LossVariant parse_loss_variant(std::string_view s);
DistanceKind parse_distance_kind(std::string_view s);
InitKind parse_init_kind(std::string_view s);
std::string_view to_string(LossVariant v);
std::string_view to_string(DistanceKind d);
std::string_view to_string(InitKind i);

inline constexpr double kGradientNormGuard = 1e-12;

struct NglConfig {
  std::size_t k = 64;
  std::size_t batch = 5000;
  std::size_t iterations = 10000;
  LossVariant loss = LossVariant::ngl_eq6;
  DistanceKind distance = DistanceKind::l2;
  std::size_t sigma_rank = 50;
  nn::MlpShape shape{3, 256, 8, 4};
  InitKind init = InitKind::geometric;
  double init_radius = 0.5;
  nn::AdamConfig adam{1e-4, 0.9, 0.999, 1e-8};

  // Reduced budget that runs in seconds to minutes on one CPU core.
  static NglConfig desk();

  void validate() const;
};

// Per-query anchor: neighbor mean (eq6/eq8) or nearest point (eq4).
Eigen::Matrix3Xd loss_anchors(const pointcloud::SpatialIndex& index,
                              const Eigen::Matrix3Xd& queries, LossVariant variant, std::size_t k);

// Mean over queries of distance(residual). When `adjoint` is given, fills
// dLoss/df and dLoss/d(grad f); the normalization uses max(|grad f|, 1e-12).
double residual_objective(const nn::FieldEval& field, const Eigen::Matrix3Xd& queries,
                          const Eigen::Matrix3Xd& anchors, LossVariant variant,
                          DistanceKind distance, nn::FieldAdjoint* adjoint = nullptr);

// The three named forms; cfg supplies k and the distance kind.
double ngl_loss(const nn::Mlp& net, const Eigen::Matrix3Xd& queries,
                const pointcloud::SpatialIndex& index, const NglConfig& cfg);
double extension_loss(const nn::Mlp& net, const Eigen::Matrix3Xd& queries,
                      const pointcloud::SpatialIndex& index, const NglConfig& cfg);
double pull_loss(const nn::Mlp& net, const Eigen::Matrix3Xd& queries,
                 const pointcloud::SpatialIndex& index, const NglConfig& cfg);

// Loss of cfg.loss and its parameter gradient.
nn::LossGradients objective_gradients(const nn::Mlp& net, const Eigen::Matrix3Xd& queries,
                                      const pointcloud::SpatialIndex& index,
                                      const NglConfig& cfg);

nn::Mlp initial_network(const NglConfig& cfg, std::uint64_t seed);

struct NglLog {
  std::vector<double> loss;
  std::vector<double> wall_ms;
};

struct NglResult {
  nn::Mlp net;
  NglLog log;
};

// Called after each iteration with (iteration, loss).
using NglProgress = std::function<void(std::size_t, double)>;

// Fits the scalar field to one cloud. Fresh queries every iteration.
// Throws NumericalError naming the iteration on a non-finite loss.
NglResult train_ngl(const pointcloud::PointCloud& cloud, const NglConfig& cfg, std::uint64_t seed,
                    const NglProgress& progress = {});

struct GradientExtraction {
  NormalField field;
  // Points whose gradient vanished; their vector is the normalized mean of
  // the valid vectors among their 8 nearest neighbors.
  std::vector<std::size_t> fallback_points;
};

GradientExtraction extract_gradients(const nn::Mlp& net, const pointcloud::PointCloud& cloud);

}  // namespace nf::ngl
