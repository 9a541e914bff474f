#include "nf/gvo/gvo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <string>

#include <spdlog/spdlog.h>

namespace nf::gvo {

using Eigen::Index;
using Eigen::VectorXd;

GvoConfig GvoConfig::desk() {
  GvoConfig cfg;
  cfg.shape.m = 64;
  cfg.shape.kernel_widths = {32, 64, 128};
  cfg.shape.score_hidden = 32;
  cfg.shape.angle_hidden = {256, 256};
  cfg.train_vectors = 128;
  cfg.test_vectors = 2000;
  cfg.patches_per_shape = 500;
  return cfg;
}

void GvoConfig::validate() const {
  shape.validate();
  if (train_vectors < 1 || test_vectors < 1) throw InvalidArgument("vector counts must be >= 1");
  if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
  if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
  if (epochs < 1 || patches_per_shape < 1 || batch_patches < 1)
    throw InvalidArgument("epochs, patches per shape and batch size must be >= 1");
  if (!(adam.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(lr_final_ratio > 0.0 && lr_final_ratio <= 1.0))
    throw InvalidArgument("final learning rate ratio must be in (0, 1]");
}

GvoLosses gvo_objective(const VectorXd& scores, const VectorXd& delta,
                        const Eigen::RowVectorXd& predicted, const Eigen::RowVectorXd& target,
                        double lambda, bool use_score) {
  if (scores.size() != delta.size() || predicted.size() != target.size())
    throw InvalidArgument("GVO objective: size mismatch");
  GvoLosses out;
  out.score = (scores - delta).squaredNorm() / static_cast<double>(scores.size());
  out.angle = (predicted - target).cwiseAbs().mean();
  out.total = (use_score ? out.score : 0.0) + lambda * out.angle;
  return out;
}

GvoLosses gvo_losses(const GvoNetwork& net, const NeighborPatch& patch,
                     const Eigen::Matrix3Xd& candidates, const Vec3& normal,
                     const GvoConfig& cfg, GvoNetwork* grads) {
  if (candidates.cols() < 1) throw InvalidArgument("no candidate vectors");
  GvoNetwork::Cache cache;
  const auto enc = net.encode(patch, grads ? &cache : nullptr);
  const Index n = enc.scores.size();
  const VectorXd delta = delta_targets(patch.coords, normal).head(n);
  const VectorXd ds = enc.scores - delta;

  GvoNetwork::AngleCache acache;
  const Eigen::RowVectorXd pred =
      net.predict_angles(enc.pooled, candidates, grads ? &acache : nullptr);
  Eigen::RowVectorXd target(candidates.cols());
  for (Index c = 0; c < candidates.cols(); ++c) target[c] = angle_between(candidates.col(c), normal);
  const Eigen::RowVectorXd err = pred - target;

  const bool use_score = net.shape().use_score;
  const auto out = gvo_objective(enc.scores, delta, pred, target, cfg.lambda, use_score);

  if (grads) {
    const double m = static_cast<double>(candidates.cols());
    Eigen::RowVectorXd dpred(err.size());
    for (Index c = 0; c < err.size(); ++c)
      dpred[c] = cfg.lambda * static_cast<double>((err[c] > 0) - (err[c] < 0)) / m;
    const VectorXd dpooled = net.backward_angles(enc.pooled, acache, dpred, *grads);
    const VectorXd dscores =
        use_score ? VectorXd(2.0 * ds / static_cast<double>(n)) : VectorXd::Zero(n);
    net.backward_encoding(cache, enc, dscores, dpooled, *grads);
  }
  return out;
}

namespace {

struct PatchJob {
  std::size_t shape;
  std::size_t center;
};

void scale_blocks(const nn::ParamBlocks& blocks, double s) {
  for (const auto& b : blocks)
    for (double& v : b.values) v *= s;
}

void zero_blocks(const nn::ParamBlocks& blocks) { scale_blocks(blocks, 0.0); }

}  // namespace

GvoResult train_gvo(std::span<const pointcloud::PointCloud> dataset, const GvoConfig& cfg,
                    std::uint64_t seed, const GvoProgress& progress) {
  cfg.validate();
  if (dataset.empty()) throw InvalidArgument("empty GVO training set");
  std::vector<pointcloud::SpatialIndex> indices;
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    if (!dataset[s].has_normals())
      throw InvalidArgument("training cloud " + std::to_string(s) + " has no ground-truth normals");
    if (dataset[s].size() < 2)
      throw InvalidArgument("training cloud " + std::to_string(s) + " has fewer than 2 points");
    indices.emplace_back(dataset[s]);
  }

  GvoResult result{GvoNetwork(cfg.shape), {}};
  auto& net = result.net;
  net.init_he(derive_seed(seed, 0));
  auto grads = net.zeros_like();
  const auto param_blocks = net.parameters();
  const auto grad_blocks = grads.parameters();
  nn::OptimizerState optimizer(cfg.adam, param_blocks);
  std::mt19937_64 rng(derive_seed(seed, 1));
  const auto m = static_cast<std::size_t>(cfg.shape.m);

  auto draw_jobs = [&]() {
    std::vector<PatchJob> jobs;
    for (std::size_t s = 0; s < dataset.size(); ++s) {
      std::uniform_int_distribution<std::size_t> pick(0, dataset[s].size() - 1);
      for (std::size_t i = 0; i < cfg.patches_per_shape; ++i) jobs.push_back({s, pick(rng)});
    }
    std::shuffle(jobs.begin(), jobs.end(), rng);
    return jobs;
  };
  auto run_job = [&](const PatchJob& job, std::mt19937_64& vrng, GvoNetwork* g) {
    const auto patch = build_patch(indices[job.shape], job.center, m);
    const auto vectors = sample_train_vectors(cfg.train_vectors, vrng);
    return gvo_losses(net, patch, vectors.candidates, dataset[job.shape].normals()[job.center], cfg, g);
  };
  auto record = [&](double loss, double score, double angle, std::size_t epoch) {
    if (!std::isfinite(loss))
      throw NumericalError("GVO diverged at epoch " + std::to_string(epoch));
    result.log.epoch_loss.push_back(loss);
    result.log.epoch_score.push_back(score);
    result.log.epoch_angle.push_back(angle);
    if (progress) progress(epoch, loss);
  };

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&]() {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  auto jobs = draw_jobs();
  {
    std::mt19937_64 probe(derive_seed(seed, 2));
    GvoLosses sum;
    for (const auto& job : jobs) {
      const auto l = run_job(job, probe, nullptr);
      sum.total += l.total;
      sum.score += l.score;
      sum.angle += l.angle;
    }
    const double k = 1.0 / static_cast<double>(jobs.size());
    record(sum.total * k, sum.score * k, sum.angle * k, 0);
    result.log.wall_ms.push_back(elapsed());
  }

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (epoch > 1) jobs = draw_jobs();
    const double progress_frac =
        cfg.epochs > 1 ? static_cast<double>(epoch - 1) / static_cast<double>(cfg.epochs - 1) : 0.0;
    optimizer.set_learning_rate(cfg.adam.learning_rate * std::pow(cfg.lr_final_ratio, progress_frac));
    GvoLosses sum;
    for (std::size_t b = 0; b < jobs.size(); b += cfg.batch_patches) {
      const std::size_t e = std::min(jobs.size(), b + cfg.batch_patches);
      zero_blocks(grad_blocks);
      for (std::size_t j = b; j < e; ++j) {
        const auto l = run_job(jobs[j], rng, &grads);
        sum.total += l.total;
        sum.score += l.score;
        sum.angle += l.angle;
      }
      scale_blocks(grad_blocks, 1.0 / static_cast<double>(e - b));
      try {
        optimizer.step(param_blocks, grad_blocks);
      } catch (const NumericalError& err) {
        throw NumericalError("GVO diverged at epoch " + std::to_string(epoch) + ": " + err.what());
      }
    }
    const double k = 1.0 / static_cast<double>(jobs.size());
    record(sum.total * k, sum.score * k, sum.angle * k, epoch);
    result.log.wall_ms.push_back(elapsed());
  }
  return result;
}

Refinement refine_normal(const AngleScorer& scorer, const Vec3& v0, const GvoConfig& cfg,
                         std::uint64_t seed) {
  const auto set = sample_test_vectors(v0, cfg.test_vectors, cfg.eta, seed);
  const VectorXd pred = scorer(set.candidates);
  if (pred.size() != set.candidates.cols()) throw InvalidArgument("scorer returned wrong count");
  Refinement best;
  best.predicted = std::numeric_limits<double>::infinity();
  bool found = false;
  for (Index c = 0; c < pred.size(); ++c) {
    if (cfg.filter_hemisphere && c > 0 && set.candidates.col(c).dot(v0) <= 0.0) continue;
    if (!std::isfinite(pred[c])) throw NumericalError("non-finite predicted angle");
    if (!found || pred[c] < best.predicted) {
      best.predicted = pred[c];
      best.candidate = static_cast<std::size_t>(c);
      found = true;
    }
  }
  best.vector = set.candidates.col(static_cast<Index>(best.candidate));
  return best;
}

Refinement refine_normal(const GvoNetwork& net, const NeighborPatch& patch, const Vec3& v0,
                         const GvoConfig& cfg, std::uint64_t seed) {
  const auto enc = net.encode(patch);
  constexpr Index kChunk = 1024;
  const AngleScorer scorer = [&](const Eigen::Matrix3Xd& candidates) {
    VectorXd out(candidates.cols());
    for (Index s = 0; s < candidates.cols(); s += kChunk) {
      const Index n = std::min(kChunk, candidates.cols() - s);
      out.segment(s, n) = net.predict_angles(enc.pooled, candidates.middleCols(s, n)).transpose();
    }
    return out;
  };
  return refine_normal(scorer, v0, cfg, seed);
}

std::vector<Vec3> refine_points(const GvoNetwork& net, const pointcloud::SpatialIndex& index,
                                const NormalField& coarse,
                                std::span<const std::size_t> points, const GvoConfig& cfg,
                                std::uint64_t seed) {
  if (coarse.vectors.size() != index.size())
    throw InvalidArgument("coarse field has " + std::to_string(coarse.vectors.size()) +
                          " vectors for " + std::to_string(index.size()) + " points");
  const auto m = static_cast<std::size_t>(net.shape().m);
  std::vector<Vec3> out(points.size());
  std::exception_ptr failure;
  std::size_t failed_at = points.size();
  const auto count = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t k = 0; k < count; ++k) {
    const auto i = points[static_cast<std::size_t>(k)];
    try {
      if (i >= index.size()) throw InvalidArgument("point index out of range");
      const auto patch = build_patch(index, i, m);
      const Vec3 v0 = coarse.vectors[i].normalized();
      out[static_cast<std::size_t>(k)] = refine_normal(net, patch, v0, cfg, derive_seed(seed, i)).vector;
    } catch (...) {
#pragma omp critical(nf_refine_failure)
      if (static_cast<std::size_t>(k) < failed_at) {
        failed_at = static_cast<std::size_t>(k);
        failure = std::current_exception();
      }
    }
  }
  if (failure) {
    const std::string where = "refinement failed at point " + std::to_string(points[failed_at]) + ": ";
    try {
      std::rethrow_exception(failure);
    } catch (const NumericalError& e) {
      throw NumericalError(where + e.what());
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(where + e.what());
    } catch (const std::exception& e) {
      throw Error(where + e.what());
    }
  }
  return out;
}

NormalField refine_field(const GvoNetwork& net, const pointcloud::PointCloud& cloud,
                              const NormalField& coarse, const GvoConfig& cfg,
                              std::uint64_t seed) {
  const pointcloud::SpatialIndex index(cloud);
  std::vector<std::size_t> all(cloud.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  NormalField out;
  out.stage = FieldStage::refined;
  out.vectors = refine_points(net, index, coarse, all, cfg, seed);
  return out;
}

}  // namespace nf::gvo
