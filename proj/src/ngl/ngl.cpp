#include "nf/ngl/ngl.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

#include "nf/ngl/sampler.hpp"

namespace nf::ngl {

using Eigen::Index;
using Eigen::Matrix3Xd;

LossVariant parse_loss_variant(std::string_view s) {
  if (s == "eq6" || s == "ngl") return LossVariant::ngl_eq6;
  if (s == "eq8" || s == "extension") return LossVariant::extension_eq8;
  if (s == "eq4" || s == "pull") return LossVariant::pull_eq4;
  throw InvalidArgument("unknown loss variant '" + std::string(s) + "'");
}

DistanceKind parse_distance_kind(std::string_view s) {
  if (s == "l2") return DistanceKind::l2;
  if (s == "l1") return DistanceKind::l1;
  if (s == "mse") return DistanceKind::mse;
  throw InvalidArgument("unknown distance kind '" + std::string(s) + "'");
}

InitKind parse_init_kind(std::string_view s) {
  if (s == "geometric") return InitKind::geometric;
  if (s == "plain") return InitKind::plain;
  throw InvalidArgument("unknown init kind '" + std::string(s) + "'");
}

std::string_view to_string(LossVariant v) {
  switch (v) {
    case LossVariant::ngl_eq6: return "eq6";
    case LossVariant::extension_eq8: return "eq8";
    case LossVariant::pull_eq4: return "eq4";
  }
  return "?";
}

std::string_view to_string(DistanceKind d) {
  switch (d) {
    case DistanceKind::l2: return "l2";
    case DistanceKind::l1: return "l1";
    case DistanceKind::mse: return "mse";
  }
  return "?";
}

std::string_view to_string(InitKind i) { return i == InitKind::geometric ? "geometric" : "plain"; }

NglConfig NglConfig::desk() {
  NglConfig cfg;
  cfg.batch = 500;
  cfg.iterations = 2000;
  cfg.shape = {3, 64, 8, 4};
  return cfg;
}

void NglConfig::validate() const {
  if (k < 1) throw InvalidArgument("k must be >= 1");
  if (batch < 1) throw InvalidArgument("batch must be >= 1");
  if (sigma_rank < 1) throw InvalidArgument("sigma rank must be >= 1");
  if (!(adam.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(init_radius > 0.0 && init_radius < 1.0)) throw InvalidArgument("init radius must be in (0, 1)");
}

Matrix3Xd loss_anchors(const pointcloud::SpatialIndex& index, const Matrix3Xd& queries,
                       LossVariant variant, std::size_t k) {
  const std::size_t kk = variant == LossVariant::pull_eq4 ? 1 : k;
  Matrix3Xd anchors(3, queries.cols());
#pragma omp parallel
  {
    std::vector<pointcloud::Neighbor> nn;
#pragma omp for schedule(static)
    for (Index i = 0; i < queries.cols(); ++i) {
      index.knn(queries.col(i), kk, nn);
      Vec3 sum = Vec3::Zero();
      for (const auto& n : nn) sum += index.point(n.index);
      anchors.col(i) = sum / static_cast<double>(nn.size());
    }
  }
  return anchors;
}

double residual_objective(const nn::FieldEval& field, const Matrix3Xd& queries,
                          const Matrix3Xd& anchors, LossVariant variant, DistanceKind distance,
                          nn::FieldAdjoint* adjoint) {
  const Index n = queries.cols();
  if (n == 0) throw InvalidArgument("objective over an empty batch");
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Vec3 g = field.gradient.col(i);
    const double len = std::max(g.norm(), kGradientNormGuard);
    const Vec3 v = g / len;
    const double f = field.value[i];
    const Vec3 fv = f * v;
    const Vec3 x = queries.col(i);
    const Vec3 anchor = anchors.col(i);

    Vec3 r;
    double sign = 1.0;  // d r / d(f v)
    switch (variant) {
      case LossVariant::ngl_eq6: {
        const Vec3 target = x - anchor;
        r = fv - target;
        break;
      }
      case LossVariant::extension_eq8:
        r = (fv - x) + anchor;
        break;
      case LossVariant::pull_eq4:
        r = (x - fv) - anchor;
        sign = -1.0;
        break;
    }

    double d = 0.0;
    Vec3 dr = Vec3::Zero();
    switch (distance) {
      case DistanceKind::l2:
        d = r.norm();
        if (d > 0.0) dr = r / d;
        break;
      case DistanceKind::l1:
        d = r.cwiseAbs().sum();
        dr = r.cwiseSign();
        break;
      case DistanceKind::mse:
        d = r.squaredNorm();
        dr = 2.0 * r;
        break;
    }
    total += d;

    if (adjoint) {
      const Vec3 dfv = sign * inv_n * dr;
      adjoint->value[i] = dfv.dot(v);
      const Vec3 dv = f * dfv;
      // v = g / max(|g|, guard): projected when the norm is active.
      const Vec3 dg = g.norm() > kGradientNormGuard ? Vec3((dv - v * v.dot(dv)) / len)
                                                    : Vec3(dv / kGradientNormGuard);
      adjoint->gradient.col(i) = dg;
    }
  }
  const double loss = total * inv_n;
  if (!std::isfinite(loss)) throw NumericalError("non-finite network output in objective");
  return loss;
}

namespace {

double variant_loss(const nn::Mlp& net, const Matrix3Xd& queries,
                    const pointcloud::SpatialIndex& index, const NglConfig& cfg,
                    LossVariant variant) {
  const auto field = nn::evaluate_with_gradient(net, queries);
  const auto anchors = loss_anchors(index, queries, variant, cfg.k);
  return residual_objective(field, queries, anchors, variant, cfg.distance);
}

}  // namespace

double ngl_loss(const nn::Mlp& net, const Matrix3Xd& queries, const pointcloud::SpatialIndex& index,
                const NglConfig& cfg) {
  return variant_loss(net, queries, index, cfg, LossVariant::ngl_eq6);
}

double extension_loss(const nn::Mlp& net, const Matrix3Xd& queries,
                      const pointcloud::SpatialIndex& index, const NglConfig& cfg) {
  return variant_loss(net, queries, index, cfg, LossVariant::extension_eq8);
}

double pull_loss(const nn::Mlp& net, const Matrix3Xd& queries,
                 const pointcloud::SpatialIndex& index, const NglConfig& cfg) {
  return variant_loss(net, queries, index, cfg, LossVariant::pull_eq4);
}

nn::LossGradients objective_gradients(const nn::Mlp& net, const Matrix3Xd& queries,
                                      const pointcloud::SpatialIndex& index,
                                      const NglConfig& cfg) {
  const auto anchors = loss_anchors(index, queries, cfg.loss, cfg.k);
  return nn::loss_gradients(net, queries, [&](const nn::FieldEval& e, nn::FieldAdjoint& adj) {
    return residual_objective(e, queries, anchors, cfg.loss, cfg.distance, &adj);
  });
}

nn::Mlp initial_network(const NglConfig& cfg, std::uint64_t seed) {
  return cfg.init == InitKind::geometric ? nn::init_geometric(cfg.shape, seed, cfg.init_radius)
                                         : nn::init_plain(cfg.shape, seed);
}

NglResult train_ngl(const pointcloud::PointCloud& cloud, const NglConfig& cfg, std::uint64_t seed,
                    const NglProgress& progress) {
  cfg.validate();
  if (cloud.size() < cfg.sigma_rank + 1) {
    throw InvalidArgument("cloud has " + std::to_string(cloud.size()) +
                          " points; need at least sigma_rank + 1 = " +
                          std::to_string(cfg.sigma_rank + 1));
  }
  const pointcloud::SpatialIndex index(cloud);
  QuerySampler sampler(index, cfg.sigma_rank, derive_seed(seed, 1));

  NglResult result{initial_network(cfg, derive_seed(seed, 0)), {}};
  auto& net = result.net;
  nn::OptimizerState optimizer(cfg.adam, net.parameters());
  result.log.loss.reserve(cfg.iterations);
  result.log.wall_ms.reserve(cfg.iterations);

  const auto start = std::chrono::steady_clock::now();
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const auto queries = sampler.sample(cfg.batch);
    nn::LossGradients lg;
    try {
      lg = objective_gradients(net, queries, index, cfg);
    } catch (const NumericalError& e) {
      throw NumericalError("NGL diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
    optimizer.step(net.parameters(), lg.grads.parameters());
    const auto now = std::chrono::steady_clock::now();
    result.log.loss.push_back(lg.loss);
    result.log.wall_ms.push_back(std::chrono::duration<double, std::milli>(now - start).count());
    if (progress) progress(it, lg.loss);
  }
  return result;
}

GradientExtraction extract_gradients(const nn::Mlp& net, const pointcloud::PointCloud& cloud) {
  constexpr Index kChunk = 4096;
  const auto n = static_cast<Index>(cloud.size());
  GradientExtraction out;
  out.field.stage = FieldStage::coarse;
  out.field.vectors.resize(cloud.size());
  std::vector<bool> valid(cloud.size(), true);

  for (Index start = 0; start < n; start += kChunk) {
    const Index count = std::min(kChunk, n - start);
    Matrix3Xd x(3, count);
    for (Index i = 0; i < count; ++i) x.col(i) = cloud.point(static_cast<std::size_t>(start + i));
    const auto field = nn::evaluate_with_gradient(net, x);
    for (Index i = 0; i < count; ++i) {
      const Vec3 g = field.gradient.col(i);
      const auto idx = static_cast<std::size_t>(start + i);
      if (g.norm() > kGradientNormGuard && g.allFinite()) {
        out.field.vectors[idx] = g.normalized();
      } else {
        valid[idx] = false;
        out.fallback_points.push_back(idx);
      }
    }
  }

  if (!out.fallback_points.empty()) {
    const pointcloud::SpatialIndex index(cloud);
    for (auto idx : out.fallback_points) {
      Vec3 sum = Vec3::Zero();
      for (const auto& nb : index.knn(cloud.point(idx), 9)) {
        if (nb.index != idx && valid[nb.index]) sum += out.field.vectors[nb.index];
      }
      if (!(sum.norm() > kGradientNormGuard)) {
        throw NumericalError("vanishing gradient at point " + std::to_string(idx) +
                             " and no valid neighbors to borrow from");
      }
      out.field.vectors[idx] = sum.normalized();
    }
    spdlog::warn("gradient vanished at {} points; substituted neighbor means",
                 out.fallback_points.size());
  }
  return out;
}

}  // namespace nf::ngl
