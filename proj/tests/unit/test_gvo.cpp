#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "nf/gvo/gvo.hpp"
#include "nf/nn/checkpoint.hpp"
#include "nf/nn/parameters.hpp"
#include "nf/pointcloud/synth.hpp"
#include "nn_oracles.hpp"
#include "test_util.hpp"

using namespace nf;
using namespace nf::gvo;
using namespace nf::testing;
using pointcloud::PointCloud;
using pointcloud::SpatialIndex;

namespace {

constexpr double kPi = std::numbers::pi;

GvoShape tiny_shape() {
  GvoShape s;
  s.m = 16;
  s.kernel_widths = {6, 8};
  s.score_hidden = 5;
  s.angle_hidden = {7, 6};
  return s;
}

GvoConfig tiny_config() {
  GvoConfig cfg;
  cfg.shape = tiny_shape();
  cfg.train_vectors = 10;
  cfg.test_vectors = 50;
  cfg.epochs = 2;
  cfg.patches_per_shape = 6;
  cfg.batch_patches = 4;
  return cfg;
}

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

double scalar_sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Identity-weight perceptron without ReLU.
nn::Perceptron identity(int dim) {
  nn::Perceptron p({dim, dim}, false);
  p.layers()[0].weight.setIdentity();
  return p;
}

}  // namespace

TEST(patch, two_points) {
  const SpatialIndex index(std::vector<Vec3>{{1, 1, 1}, {1, 3, 1}});
  const auto patch = build_patch(index, 0, 2);
  ASSERT_EQ(patch.size(), 2u);
  EXPECT_EQ(Vec3(patch.coords.col(0)), Vec3::Zero());
  EXPECT_TRUE(Vec3(patch.coords.col(1)).isApprox(Vec3(0, 1, 0)));
  EXPECT_DOUBLE_EQ(patch.scale, 2.0);
}

TEST(patch, coplanar_points_stay_coplanar) {
  std::mt19937_64 rng(1);
  const Vec3 n = random_unit(rng);
  const auto [e1, e2] = tangent_basis(n);
  std::vector<Vec3> pts;
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 200; ++i) pts.push_back(Vec3(0.2, 0.1, -0.3) + u(rng) * e1 + u(rng) * e2);
  const SpatialIndex index(pts);
  const auto patch = build_patch(index, 17, 50);
  for (Eigen::Index j = 0; j < patch.coords.cols(); ++j)
    EXPECT_NEAR(patch.coords.col(j).dot(n), 0.0, 1e-12);
}

TEST(patch, membership_matches_brute_force) {
  const auto pts = random_points(2000, 4);
  const SpatialIndex index(pts);
  for (std::size_t center : {0u, 999u, 1500u}) {
    const auto patch = build_patch(index, center, 700);
    const auto ref = pointcloud::brute_force_knn(pts, pts[center], 700);
    std::vector<std::size_t> a = patch.indices, b;
    for (const auto& r : ref) b.push_back(r.index);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
    EXPECT_EQ(patch.indices.front(), center);
    EXPECT_NEAR(patch.distances.maxCoeff(), 1.0, 1e-9);
    for (Eigen::Index j = 1; j < patch.distances.size(); ++j)
      EXPECT_LE(patch.distances[j - 1], patch.distances[j] + 1e-15);
  }
}

TEST(patch, small_cloud_uses_all_points) {
  const auto pts = random_points(10, 2);
  const SpatialIndex index(pts);
  EXPECT_EQ(build_patch(index, 3, 700).size(), 10u);
}

TEST(patch, coincident_neighbors_rejected) {
  const SpatialIndex index(std::vector<Vec3>(5, Vec3(1, 2, 3)));
  EXPECT_THROW(build_patch(index, 0, 5), NumericalError);
}

TEST(kernel_weights, equidistant_is_uniform) {
  const auto w = kernel_weights(Eigen::VectorXd::Constant(7, 0.4), 1.0, 1.0);
  for (Eigen::Index i = 0; i < w.size(); ++i) EXPECT_NEAR(w[i], 1.0 / 7.0, 1e-15);
}

TEST(kernel_weights, worked_example) {
  Eigen::VectorXd r(2);
  r << 0.0, 1.0;
  const auto w = kernel_weights(r, 1.0, 1.0);
  const double d0 = scalar_sigmoid(1.0), d1 = scalar_sigmoid(0.0);
  EXPECT_NEAR(d0, 0.73106, 1e-5);
  EXPECT_NEAR(w[0], d0 / (d0 + d1), 1e-15);
  EXPECT_NEAR(w[0], 0.59385, 1e-5);
  EXPECT_NEAR(w[1], 0.40615, 1e-5);
}

TEST(kernel_weights, sum_to_one_and_permute_exactly) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd r(100);
    for (auto& v : r) v = u(rng);
    const double t1 = 3 * u(rng) - 1, t2 = 5 * u(rng);
    const auto w = kernel_weights(r, t1, t2);
    EXPECT_NEAR(w.sum(), 1.0, 1e-9);
    EXPECT_GT(w.minCoeff(), 0.0);
    std::vector<int> perm(100);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::VectorXd rp(100);
    for (int i = 0; i < 100; ++i) rp[i] = r[perm[i]];
    const auto wp = kernel_weights(rp, t1, t2);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(wp[i], w[perm[i]]);
  }
}

TEST(kernel_layer, pooling_is_permutation_invariant) {
  GvoNetwork net(tiny_shape());
  net.init_he(1);
  const auto& layer = net.layers()[0];
  std::mt19937_64 rng(2);
  Eigen::MatrixXd f = Eigen::MatrixXd::Random(3, 40);
  Eigen::VectorXd r = f.colwise().norm().transpose();
  const auto pooled = layer.pooled(f, r, true);
  std::vector<int> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd fp(3, 40);
    Eigen::VectorXd rp(40);
    for (int i = 0; i < 40; ++i) {
      fp.col(i) = f.col(perm[i]);
      rp[i] = r[perm[i]];
    }
    EXPECT_EQ(layer.pooled(fp, rp, true), pooled);
  }
}

TEST(kernel_layer, uniform_identity_pool_is_coordinatewise_max) {
  KernelLayer layer;
  layer.alpha = identity(3);
  layer.beta = identity(3);
  layer.gamma = nn::Perceptron({6, 3}, false);
  const Eigen::MatrixXd f = Eigen::MatrixXd::Random(3, 25);
  const Eigen::VectorXd r = Eigen::VectorXd::Constant(25, 0.5);
  const auto pooled = layer.pooled(f, r, false);
  EXPECT_EQ(pooled, Eigen::VectorXd(f.rowwise().maxCoeff()));
  // Equidistant neighbors under learned weights give the same up to rounding.
  EXPECT_TRUE(layer.pooled(f, r, true).isApprox(pooled, 1e-14));
}

TEST(kernel_layer, output_counts_halve) {
  GvoShape s;
  EXPECT_EQ(s.neighbor_schedule(), (std::vector<int>{700, 350, 175, 87}));
  auto shape = tiny_shape();
  shape.m = 64;
  GvoNetwork net(shape);
  net.init_he(3);
  const auto pts = random_points(300, 5);
  const SpatialIndex index(pts);
  const auto enc = net.encode(build_patch(index, 0, 64));
  EXPECT_EQ(enc.features.cols(), 16);
  EXPECT_EQ(enc.scores.size(), 16);
}

TEST(kernel_layer, rejects_dimension_mismatch) {
  GvoNetwork net(tiny_shape());
  const auto& layer = net.layers()[1];
  EXPECT_THROW(layer.forward(Eigen::MatrixXd::Zero(3, 8), Eigen::VectorXd::Zero(8), 4, true),
               InvalidArgument);
}

TEST(delta, on_plane_is_one_and_floor_active) {
  Eigen::Matrix3Xd x(3, 4);
  x << 0.1, 0.5, -0.3, 0.0, 0.2, -0.7, 0.4, 0.0, 0, 0, 0, 0;
  const Vec3 n(0, 0, 1);
  EXPECT_EQ(delta_rho(x, n), 0.0025);
  const auto d = delta_targets(x, n);
  for (Eigen::Index i = 0; i < d.size(); ++i) EXPECT_EQ(d[i], 1.0);
}

TEST(delta, matches_scalar_formula) {
  std::mt19937_64 rng(8);
  const auto pts = random_points(500, 9);
  const SpatialIndex index(pts);
  const auto patch = build_patch(index, 5, 100);
  const Vec3 n = random_unit(rng);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < patch.coords.cols(); ++i) {
    const double r = patch.coords.col(i).dot(n);
    sum += r * r;
  }
  const double rho = std::max(0.0025, 0.3 * sum / 100.0);
  const auto d = delta_targets(patch.coords, n);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double r = patch.coords.col(i).dot(n);
    EXPECT_NEAR(d[i], std::exp(-r * r / (rho * rho)), 1e-12);
    EXPECT_GT(d[i], 0.0);
    EXPECT_LE(d[i], 1.0);
  }
}

TEST(delta, decreases_with_residual) {
  Eigen::Matrix3Xd x(3, 5);
  x << 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0.1, 0.2, -0.3, 0.5;
  const auto d = delta_targets(x, Vec3(0, 0, 1));
  EXPECT_EQ(d[0], 1.0);
  EXPECT_GT(d[1], d[2]);
  EXPECT_GT(d[2], d[3]);
  EXPECT_GT(d[3], d[4]);
}

TEST(angles, identities) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Vec3 a = random_unit(rng), b = random_unit(rng);
    EXPECT_EQ(angle_between(a, a), 0.0);
    EXPECT_EQ(angle_between(a, -a), kPi);
    EXPECT_EQ(angle_between(a, b), angle_between(b, a));
    EXPECT_NEAR(angle_between(a, b), std::acos(std::clamp(a.dot(b), -1.0, 1.0)), 1e-7);
  }
}

TEST(losses, perfect_predictions_are_zero) {
  Eigen::VectorXd s(3);
  s << 0.2, 1.0, 0.7;
  Eigen::RowVectorXd a(2);
  a << 0.0, kPi;
  const auto l = gvo_objective(s, s, a, a, 0.5, true);
  EXPECT_EQ(l.score, 0.0);
  EXPECT_EQ(l.angle, 0.0);
  EXPECT_EQ(l.total, 0.0);
}

TEST(losses, lambda_arithmetic) {
  // L1 = mean((0.1 + sqrt(0.1))^2 ...) is awkward, so pick values directly.
  Eigen::VectorXd s(2), d(2);
  s << std::sqrt(0.1), -std::sqrt(0.1);
  d << 0.0, 0.0;
  Eigen::RowVectorXd p(2), t(2);
  p << 0.4, 0.0;
  t << 0.0, 0.4;
  const auto l = gvo_objective(s, d, p, t, 0.5, true);
  EXPECT_NEAR(l.score, 0.1, 1e-15);
  EXPECT_NEAR(l.angle, 0.4, 1e-15);
  EXPECT_NEAR(l.total, 0.3, 1e-15);
  EXPECT_NEAR(gvo_objective(s, d, p, t, 0.5, false).total, 0.2, 1e-15);
}

TEST(losses, targets_for_aligned_and_opposite_candidates) {
  GvoNetwork net(tiny_shape());
  const auto pts = random_points(100, 1);
  const SpatialIndex index(pts);
  const auto patch = build_patch(index, 0, 16);
  const Vec3 n(0, 0, 1);
  // Zero network predicts pi/2 everywhere.
  const auto cfg = tiny_config();
  EXPECT_NEAR(gvo_losses(net, patch, Eigen::Matrix3Xd(n), n, cfg).angle, kPi / 2, 1e-15);
  EXPECT_NEAR(gvo_losses(net, patch, Eigen::Matrix3Xd(-n), n, cfg).angle, kPi / 2, 1e-15);
}

TEST(losses, outputs_in_range) {
  GvoNetwork net(tiny_shape());
  net.init_he(9);
  const auto pts = random_points(200, 3);
  const SpatialIndex index(pts);
  const auto enc = net.encode(build_patch(index, 7, 16));
  EXPECT_GE(enc.scores.minCoeff(), 0.0);
  EXPECT_LE(enc.scores.maxCoeff(), 1.0);
  const auto a = net.predict_angles(enc.pooled, sample_train_vectors(200, 1).candidates);
  EXPECT_GE(a.minCoeff(), 0.0);
  EXPECT_LE(a.maxCoeff(), kPi);
}

class LossGradient : public ::testing::TestWithParam<std::tuple<bool, bool>> {};

TEST_P(LossGradient, matches_finite_differences) {
  auto shape = tiny_shape();
  shape.use_score = std::get<0>(GetParam());
  shape.use_kernel_weight = std::get<1>(GetParam());
  GvoNetwork net(shape);
  net.init_he(21);
  // Non-trivial biases and thetas.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.1);
  for (auto& b : net.parameters())
    if (b.name.ends_with("bias")) for (double& v : b.values) v = g(rng);
  for (auto& layer : net.layers()) layer.theta << 1.3, 2.1;
  auto cfg = tiny_config();
  cfg.shape = shape;
  const auto pts = random_points(200, 6);
  const SpatialIndex index(pts);
  const auto patch = build_patch(index, 11, 16);
  const auto cand = sample_train_vectors(12, 3).candidates;
  const Vec3 n = random_unit(rng);

  auto grads = net.zeros_like();
  gvo_losses(net, patch, cand, n, cfg, &grads);
  const auto analytic = nn::flatten(grads.parameters());

  std::vector<double> fd;
  const double h = 1e-6;
  for (auto& block : net.parameters()) {
    for (double& v : block.values) {
      const double saved = v;
      v = saved + h;
      const double up = gvo_losses(net, patch, cand, n, cfg).total;
      v = saved - h;
      const double down = gvo_losses(net, patch, cand, n, cfg).total;
      v = saved;
      fd.push_back((up - down) / (2 * h));
    }
  }
  EXPECT_LT(relative_error(analytic, fd), 1e-5);
  // theta gradients are exercised when weights are on.
  const auto blocks = grads.parameters();
  for (const auto& b : blocks)
    if (b.name.ends_with("theta") && shape.use_kernel_weight) EXPECT_NE(b.values[0], 0.0);
}

INSTANTIATE_TEST_SUITE_P(flags, LossGradient,
                         ::testing::Combine(::testing::Bool(), ::testing::Bool()));

TEST(train_vectors, uniform_unit_deterministic) {
  const auto a = sample_train_vectors(100000, 5);
  EXPECT_LT(Vec3(a.candidates.rowwise().mean()).norm(), 0.02);
  for (Eigen::Index i = 0; i < a.candidates.cols(); ++i)
    ASSERT_NEAR(a.candidates.col(i).norm(), 1.0, 1e-12);
  EXPECT_EQ(sample_train_vectors(100, 5).candidates, sample_train_vectors(100, 5).candidates);
  EXPECT_EQ(a.source, SampleSource::train_uniform);
}

TEST(test_vectors, zero_eta_collapses_to_v0) {
  const Vec3 v0 = Vec3(1, 2, 2) / 3.0;
  const auto s = sample_test_vectors(v0, 100, 0.0, 1);
  for (Eigen::Index i = 0; i < s.candidates.cols(); ++i) EXPECT_EQ(Vec3(s.candidates.col(i)), v0);
}

TEST(test_vectors, first_candidate_is_v0) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const Vec3 v0 = random_unit(rng);
    EXPECT_EQ(Vec3(sample_test_vectors(v0, 10, 0.4, i).candidates.col(0)), v0);
  }
}

TEST(test_vectors, angular_std_matches_eta) {
  const Vec3 v0 = Vec3(0.3, -0.4, 0.866).normalized();
  const auto s = sample_test_vectors(v0, 100000, 0.4, 7);
  double sa = 0.0, sb = 0.0;
  for (Eigen::Index i = 0; i < s.candidates.cols(); ++i) {
    ASSERT_NEAR(s.candidates.col(i).norm(), 1.0, 1e-6);
    const auto t = log_map(v0, s.candidates.col(i));
    sa += t[0] * t[0];
    sb += t[1] * t[1];
  }
  const double n = static_cast<double>(s.candidates.cols());
  const double expected = 18.0 * kPi / 180.0;
  EXPECT_NEAR(std::sqrt(sa / n), expected, 0.1 * expected);
  EXPECT_NEAR(std::sqrt(sb / n), expected, 0.1 * expected);
}

TEST(refine, stub_head_returns_true_argmin) {
  std::mt19937_64 rng(11);
  auto cfg = tiny_config();
  cfg.test_vectors = 200;
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec3 n = random_unit(rng);
    const Vec3 v0 = (n + 0.5 * random_unit(rng)).normalized();
    const AngleScorer truth = [&](const Eigen::Matrix3Xd& c) {
      Eigen::VectorXd a(c.cols());
      for (Eigen::Index i = 0; i < c.cols(); ++i) a[i] = angle_between(c.col(i), n);
      return a;
    };
    const auto r = refine_normal(truth, v0, cfg, trial);
    const auto set = sample_test_vectors(v0, cfg.test_vectors, cfg.eta, trial);
    std::size_t best = 0;
    for (Eigen::Index i = 1; i < set.candidates.cols(); ++i)
      if (angle_between(set.candidates.col(i), n) < angle_between(set.candidates.col(best), n))
        best = static_cast<std::size_t>(i);
    ASSERT_EQ(r.candidate, best);
    ASSERT_EQ(r.vector, Vec3(set.candidates.col(static_cast<Eigen::Index>(best))));
  }
}

TEST(refine, ties_go_to_lowest_index) {
  auto cfg = tiny_config();
  const AngleScorer flat = [](const Eigen::Matrix3Xd& c) { return Eigen::VectorXd::Constant(c.cols(), 1.0); };
  const Vec3 v0(0, 1, 0);
  const auto r = refine_normal(flat, v0, cfg, 3);
  EXPECT_EQ(r.candidate, 0u);
  EXPECT_EQ(r.vector, v0);
}

TEST(refine, zero_eta_returns_v0) {
  GvoNetwork net(tiny_shape());
  net.init_he(2);
  auto cfg = tiny_config();
  cfg.eta = 0.0;
  const auto pts = random_points(100, 1);
  const SpatialIndex index(pts);
  const Vec3 v0 = Vec3(1, -1, 1).normalized();
  EXPECT_EQ(refine_normal(net, build_patch(index, 4, 16), v0, cfg, 9).vector, v0);
}

TEST(refine, output_is_argmin_of_predictions) {
  GvoNetwork net(tiny_shape());
  net.init_he(4);
  auto cfg = tiny_config();
  cfg.test_vectors = 300;
  const auto pts = random_points(200, 2);
  const SpatialIndex index(pts);
  const auto patch = build_patch(index, 10, 16);
  const Vec3 v0 = Vec3(0.2, 0.3, -1).normalized();
  const auto r = refine_normal(net, patch, v0, cfg, 5);
  const auto set = sample_test_vectors(v0, cfg.test_vectors, cfg.eta, 5);
  const auto pred = net.predict_angles(net.encode(patch).pooled, set.candidates);
  for (Eigen::Index i = 0; i < pred.size(); ++i) EXPECT_LE(r.predicted, pred[i]);
  EXPECT_EQ(r.predicted, pred[static_cast<Eigen::Index>(r.candidate)]);
}

TEST(refine, hemisphere_preserved) {
  std::mt19937_64 rng(12);
  GvoConfig cfg;
  cfg.test_vectors = 4000;
  std::size_t kept = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    const Vec3 v0 = random_unit(rng);
    // Coarse vector within 45 degrees of the true normal.
    Vec3 target;
    do {
      target = random_unit(rng);
    } while (target.dot(v0) < std::cos(kPi / 4));
    const AngleScorer truth = [&](const Eigen::Matrix3Xd& c) {
      Eigen::VectorXd a(c.cols());
      for (Eigen::Index i = 0; i < c.cols(); ++i) a[i] = angle_between(c.col(i), target);
      return a;
    };
    kept += refine_normal(truth, v0, cfg, t).vector.dot(v0) > 0;
  }
  EXPECT_GE(kept, static_cast<std::size_t>(0.999 * trials));
}

TEST(refine, filter_drops_far_hemisphere) {
  auto cfg = tiny_config();
  cfg.eta = 3.0;
  cfg.test_vectors = 500;
  cfg.filter_hemisphere = true;
  const Vec3 v0(0, 0, 1);
  const AngleScorer toward_minus = [](const Eigen::Matrix3Xd& c) {
    Eigen::VectorXd a(c.cols());
    for (Eigen::Index i = 0; i < c.cols(); ++i) a[i] = angle_between(c.col(i), Vec3(0, 0, -1));
    return a;
  };
  EXPECT_GT(refine_normal(toward_minus, v0, cfg, 1).vector.dot(v0), 0.0);
}

TEST(refine_field, unit_vectors_and_subset_identity) {
  GvoNetwork net(tiny_shape());
  net.init_he(6);
  auto cfg = tiny_config();
  const auto cloud = pointcloud::synth_shape(pointcloud::ShapeKind::torus, 400, 3);
  NormalField coarse;
  for (const auto& p : cloud.points()) coarse.vectors.push_back(p.normalized());
  const auto full = refine_field(net, cloud, coarse, cfg, 77);
  EXPECT_EQ(full.stage, FieldStage::refined);
  full.validate();
  const SpatialIndex index(cloud);
  const std::vector<std::size_t> subset{399, 5, 123};
  const auto part = refine_points(net, index, coarse, subset, cfg, 77);
  for (std::size_t k = 0; k < subset.size(); ++k) EXPECT_EQ(part[k], full.vectors[subset[k]]);
}

TEST(refine_field, reports_failing_point) {
  GvoNetwork net(tiny_shape());
  auto cfg = tiny_config();
  std::vector<Vec3> pts(20, Vec3(0.1, 0.1, 0.1));
  pts.emplace_back(0.9, 0.9, 0.9);
  const PointCloud cloud(pts);
  NormalField coarse;
  coarse.vectors.assign(pts.size(), Vec3(0, 0, 1));
  try {
    refine_field(net, cloud, coarse, cfg, 1);
    FAIL() << "expected an error";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("point 0"), std::string::npos);
  }
}

TEST(train, deterministic_and_logged) {
  auto cfg = tiny_config();
  std::vector<PointCloud> data{pointcloud::synth_shape(pointcloud::ShapeKind::sphere, 200, 1),
                               pointcloud::synth_shape(pointcloud::ShapeKind::cube, 200, 2)};
  auto a = train_gvo(data, cfg, 3);
  auto b = train_gvo(data, cfg, 3);
  EXPECT_EQ(a.log.epoch_loss, b.log.epoch_loss);
  EXPECT_EQ(nn::flatten(a.net.parameters()), nn::flatten(b.net.parameters()));
  EXPECT_EQ(a.log.epoch_loss.size(), cfg.epochs + 1);
}

TEST(train, disable_score_omits_score_loss) {
  auto cfg = tiny_config();
  cfg.shape.use_score = false;
  cfg.lambda = 0.2;
  std::vector<PointCloud> data{pointcloud::synth_shape(pointcloud::ShapeKind::sphere, 200, 1)};
  const auto r = train_gvo(data, cfg, 3);
  for (std::size_t e = 0; e < r.log.epoch_loss.size(); ++e)
    EXPECT_NEAR(r.log.epoch_loss[e], 0.2 * r.log.epoch_angle[e], 1e-12);
}

TEST(train, requires_normals) {
  std::vector<PointCloud> data{PointCloud(random_points(50, 1))};
  EXPECT_THROW(train_gvo(data, tiny_config(), 1), InvalidArgument);
}

TEST(train, thetas_are_updated) {
  auto cfg = tiny_config();
  std::vector<PointCloud> data{pointcloud::synth_shape(pointcloud::ShapeKind::torus, 300, 1)};
  const auto r = train_gvo(data, cfg, 5);
  for (const auto& layer : r.net.layers()) EXPECT_NE(layer.theta, Eigen::VectorXd::Ones(2));
}

TEST(checkpoint, round_trip) {
  TempDir dir;
  auto shape = tiny_shape();
  shape.use_kernel_weight = false;
  GvoNetwork net(shape);
  net.init_he(8);
  save_gvo(dir / "g.ckpt", net);
  auto back = load_gvo(dir / "g.ckpt");
  EXPECT_EQ(back.shape().kernel_widths, shape.kernel_widths);
  EXPECT_FALSE(back.shape().use_kernel_weight);
  EXPECT_EQ(nn::flatten(back.parameters()), nn::flatten(net.parameters()));
}

TEST(checkpoint, rejects_field_checkpoint) {
  TempDir dir;
  nn::Mlp mlp({3, 4, 2, std::nullopt});
  nn::save_mlp(dir / "f.ckpt", mlp);
  EXPECT_THROW(load_gvo(dir / "f.ckpt"), IoError);
}
