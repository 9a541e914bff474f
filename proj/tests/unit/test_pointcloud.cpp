#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "nf/pointcloud/io.hpp"
#include "nf/pointcloud/point_cloud.hpp"
#include "nf/pointcloud/spatial_index.hpp"
#include "nf/pointcloud/synth.hpp"
#include "test_util.hpp"

using namespace nf;
using namespace nf::pointcloud;
using nf::testing::TempDir;
using nf::testing::write_text;

namespace {

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

}  // namespace

TEST(load_cloud, single_row_without_normals) {
  TempDir dir;
  write_text(dir / "a.xyz", "0 0 1\n");
  const auto cloud = load_cloud(dir / "a.xyz", CloudFormat::xyz);
  ASSERT_EQ(cloud.size(), 1u);
  EXPECT_EQ(cloud.point(0), Vec3(0, 0, 1));
  EXPECT_FALSE(cloud.has_normals());
  EXPECT_EQ(cloud.transform().scale, 1.0);
  EXPECT_EQ(cloud.transform().centroid, Vec3::Zero());
}

TEST(load_cloud, six_columns_carry_normals) {
  TempDir dir;
  write_text(dir / "a.xyz", "1 2 3 0 0 1\n");
  const auto cloud = load_cloud(dir / "a.xyz", CloudFormat::xyz);
  EXPECT_EQ(cloud.point(0), Vec3(1, 2, 3));
  ASSERT_TRUE(cloud.has_normals());
  EXPECT_EQ(cloud.normals()[0], Vec3(0, 0, 1));
}

TEST(load_cloud, malformed_row_reports_line_number) {
  TempDir dir;
  write_text(dir / "bad.xyz", "0 0 0\n1 2\n");
  try {
    load_cloud(dir / "bad.xyz", CloudFormat::xyz);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  write_text(dir / "nan.xyz", "0 0 nan\n");
  EXPECT_THROW(load_cloud(dir / "nan.xyz", CloudFormat::xyz), ParseError);
}

TEST(load_cloud, empty_file_is_an_error) {
  TempDir dir;
  write_text(dir / "empty.xyz", "");
  EXPECT_THROW(load_cloud(dir / "empty.xyz", CloudFormat::xyz), IoError);
  EXPECT_THROW(load_cloud(dir / "missing.xyz", CloudFormat::xyz), IoError);
}

TEST(load_cloud, sidecar_round_trip) {
  TempDir dir;
  const auto cloud = synth_shape(ShapeKind::torus, 200, 3);
  save_cloud(cloud, dir / "torus.xyz");
  ASSERT_TRUE(std::filesystem::exists(dir / "torus.normals"));
  const auto back = load_cloud(dir / "torus.xyz");
  ASSERT_EQ(back.size(), cloud.size());
  ASSERT_TRUE(back.has_normals());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    EXPECT_EQ(back.point(i), cloud.point(i));
    EXPECT_EQ(back.normals()[i], cloud.normals()[i]);
  }
}

TEST(load_cloud, ply_ascii_and_binary) {
  TempDir dir;
  const auto cloud = synth_shape(ShapeKind::sphere, 50, 1);
  std::vector<Rgb> colors(cloud.size(), Rgb{10, 20, 30});
  for (bool binary : {false, true}) {
    const auto path = dir / (binary ? "b.ply" : "a.ply");
    save_ply(cloud.points(), path,
             {binary, {"hello"}, &cloud.normals(), &colors});
    const auto back = load_cloud(path);
    ASSERT_EQ(back.size(), cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      EXPECT_EQ(back.point(i), cloud.point(i));
      EXPECT_EQ(back.normals()[i], cloud.normals()[i]);
    }
    EXPECT_EQ(read_ply_comments(path), std::vector<std::string>{"hello"});
    EXPECT_EQ(read_ply_colors(path)[7].g, 20);
  }
}

TEST(load_cloud, ply_with_float_properties) {
  TempDir dir;
  write_text(dir / "f.ply",
             "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
             "property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n"
             "element face 0\nproperty list uchar int vertex_indices\nend_header\n"
             "0 0 1 255 0 0\n1 0 0 0 255 0\n");
  const auto cloud = load_cloud(dir / "f.ply");
  ASSERT_EQ(cloud.size(), 2u);
  EXPECT_EQ(cloud.point(1), Vec3(1, 0, 0));
  EXPECT_FALSE(cloud.has_normals());
}

TEST(point_cloud, rejects_invalid_normals) {
  EXPECT_THROW(PointCloud({Vec3(0, 0, 0)}, std::vector<Vec3>{Vec3(0, 0, 2)}), InvalidArgument);
  EXPECT_THROW(PointCloud({Vec3(0, 0, 0)}, std::vector<Vec3>{}), InvalidArgument);
  EXPECT_THROW(PointCloud(std::vector<Vec3>{}), InvalidArgument);
}

TEST(normalize_cloud, two_point_symmetry) {
  const PointCloud cloud({Vec3(0, 0, 0), Vec3(2, 0, 0)});
  const auto n = normalize_cloud(cloud);
  EXPECT_EQ(n.point(0), Vec3(-1, 0, 0));
  EXPECT_EQ(n.point(1), Vec3(1, 0, 0));
  EXPECT_EQ(n.transform().centroid, Vec3(1, 0, 0));
  EXPECT_EQ(n.transform().scale, 1.0);
}

TEST(normalize_cloud, identical_points_fail) {
  const PointCloud cloud({Vec3(1, 1, 1), Vec3(1, 1, 1)});
  EXPECT_THROW(normalize_cloud(cloud), NumericalError);
}

TEST(normalize_cloud, idempotent_and_invertible) {
  const auto raw = PointCloud(random_points(100, 5));
  std::vector<Vec3> shifted;
  for (const auto& p : raw.points()) shifted.push_back(3.0 * p + Vec3(5, -2, 1));
  const PointCloud cloud(shifted);

  const auto once = normalize_cloud(cloud);
  double max_norm = 0.0;
  for (const auto& p : once.points()) max_norm = std::max(max_norm, p.norm());
  EXPECT_NEAR(max_norm, 1.0, 1e-12);

  const auto twice = normalize_cloud(once);
  for (std::size_t i = 0; i < once.size(); ++i) {
    EXPECT_LT((twice.point(i) - once.point(i)).norm(), 1e-12);
    EXPECT_LT((twice.transform().invert(twice.point(i)) - cloud.point(i)).norm(), 1e-9);
  }
}

TEST(normalize_cloud, unit_sphere_samples_unchanged) {
  const auto sphere = synth_shape(ShapeKind::sphere, 2000, 9);
  const auto n = normalize_cloud(sphere);
  // The sample centroid is not exactly the origin, so the tolerance scales
  // with it.
  for (std::size_t i = 0; i < sphere.size(); ++i) {
    EXPECT_LT((n.normals()[i] - sphere.normals()[i]).norm(), 1e-12);
  }
  double max_norm = 0.0;
  for (const auto& p : n.points()) max_norm = std::max(max_norm, p.norm());
  EXPECT_LE(max_norm, 1.0 + 1e-9);
}

TEST(knn, self_query_on_grid) {
  std::vector<Vec3> grid;
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 3; ++y)
      for (int z = 0; z < 3; ++z) grid.emplace_back(x, y, z);
  const SpatialIndex index(grid);
  const auto nn = index.knn(Vec3(0, 0, 0), 1);
  ASSERT_EQ(nn.size(), 1u);
  EXPECT_EQ(nn[0].index, 0u);
  EXPECT_EQ(nn[0].distance, 0.0);
}

TEST(knn, one_dimensional_case_and_clamping) {
  const SpatialIndex index(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(1, 0, 0)});
  const auto nn = index.knn(Vec3(0.4, 0, 0), 2);
  ASSERT_EQ(nn.size(), 2u);
  EXPECT_NEAR(nn[0].distance, 0.4, 1e-15);
  EXPECT_NEAR(nn[1].distance, 0.6, 1e-15);
  EXPECT_EQ(index.knn(Vec3(0, 0, 0), 10).size(), 2u);
}

TEST(knn, ties_and_duplicates_ordered_by_index) {
  const SpatialIndex index(
      std::vector<Vec3>{Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0), Vec3(1, 0, 0)});
  const auto nn = index.knn(Vec3(0, 0, 0), 4);
  ASSERT_EQ(nn.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(nn[i].index, i);
  const auto dup = index.knn(Vec3(1, 0, 0), 2);
  EXPECT_EQ(dup[0].index, 0u);
  EXPECT_EQ(dup[1].index, 3u);
  EXPECT_EQ(dup[1].distance, 0.0);
}

TEST(knn, matches_brute_force) {
  const auto pts = random_points(1000, 11);
  const SpatialIndex index(pts);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  for (int q = 0; q < 100; ++q) {
    const Vec3 query(u(rng), u(rng), u(rng));
    const auto got = index.knn(query, 64);
    const auto want = brute_force_knn(pts, query, 64);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].index, want[i].index);
      EXPECT_EQ(got[i].distance, want[i].distance);
      if (i > 0) EXPECT_LE(got[i - 1].distance, got[i].distance);
    }
  }
}

TEST(knn, grid_with_many_ties_matches_brute_force) {
  std::vector<Vec3> grid;
  for (int x = 0; x < 6; ++x)
    for (int y = 0; y < 6; ++y)
      for (int z = 0; z < 6; ++z) grid.emplace_back(x, y, z);
  const SpatialIndex index(grid);
  for (std::size_t q = 0; q < grid.size(); q += 7) {
    const auto got = index.knn(grid[q], 27);
    const auto want = brute_force_knn(grid, grid[q], 27);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].index, want[i].index);
    EXPECT_EQ(got[0].index, q);
  }
}

TEST(mean_neighbor_vector, symmetric_and_single_neighbor) {
  const SpatialIndex sym(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(2, 0, 0)});
  EXPECT_EQ(mean_neighbor_vector(sym, Vec3(1, 0, 0), 2), Vec3(0, 0, 0));
  const SpatialIndex one(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(5, 5, 5)});
  EXPECT_EQ(mean_neighbor_vector(one, Vec3(0, 0, 1), 1), Vec3(0, 0, 1));
}

TEST(mean_neighbor_vector, matches_brute_force_mean) {
  const auto pts = random_points(1000, 21);
  const SpatialIndex index(pts);
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int q = 0; q < 20; ++q) {
    const Vec3 x(u(rng), u(rng), u(rng));
    Vec3 mean = Vec3::Zero();
    for (const auto& n : brute_force_knn(pts, x, 64)) mean += pts[n.index];
    mean /= 64.0;
    const Vec3 v = mean_neighbor_vector(index, x, 64);
    EXPECT_LT((v - (x - mean)).norm(), 1e-15);
    // v + centroid recovers x.
    EXPECT_LT((v + mean - x).norm(), 1e-15);
  }
}

TEST(synth_shape, sphere_normals_radial) {
  const auto s = synth_shape(ShapeKind::sphere, 500, 4);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_LT((s.normals()[i] - s.point(i) / s.point(i).norm()).norm(), 1e-15);
    EXPECT_NEAR(s.normals()[i].norm(), 1.0, 1e-12);
    EXPECT_GT(s.normals()[i].dot(s.point(i)), 0.0);
  }
}

TEST(synth_shape, cube_face_normals) {
  const auto c = synth_shape(ShapeKind::cube, 600, 4);
  int top = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& p = c.point(i);
    EXPECT_NEAR(p.cwiseAbs().maxCoeff(), 0.5, 1e-15);
    if (p.z() == 0.5) {
      ++top;
      EXPECT_EQ(c.normals()[i], Vec3(0, 0, 1));
    }
  }
  EXPECT_GT(top, 50);
}

TEST(synth_shape, torus_normals_match_closed_form) {
  const auto t = synth_shape(ShapeKind::torus, 1000, 4);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Vec3& p = t.point(i);
    const Vec3 ring = kTorusMajorRadius * Vec3(p.x(), p.y(), 0).normalized();
    const Vec3 expected = (p - ring) / kTorusMinorRadius;
    EXPECT_LT((t.normals()[i] - expected).norm(), 1e-9);
  }
}

TEST(synth_shape, deterministic_and_validated) {
  const auto a = synth_shape(ShapeKind::torus, 300, 8);
  const auto b = synth_shape(ShapeKind::torus, 300, 8);
  EXPECT_EQ(a.points(), b.points());
  EXPECT_THROW(synth_shape(ShapeKind::sphere, 3, 1), InvalidArgument);
  EXPECT_THROW(parse_shape_kind("dodecahedron"), InvalidArgument);
}

TEST(corrupt, zero_noise_is_identity) {
  const auto s = synth_shape(ShapeKind::sphere, 100, 1);
  const auto c = corrupt(s, 0.0, DensityPattern::none, 3);
  EXPECT_EQ(c.points(), s.points());
  EXPECT_THROW(corrupt(s, -0.1, DensityPattern::none, 3), InvalidArgument);
}

TEST(corrupt, noise_std_matches_diagonal_fraction) {
  const auto s = normalize_cloud(synth_shape(ShapeKind::sphere, 20000, 2));
  const double frac = 0.0012;
  const auto c = corrupt(s, frac, DensityPattern::none, 5);
  const double expected = frac * bounding_box_diagonal(s);
  for (int axis = 0; axis < 3; ++axis) {
    double sum = 0, sum2 = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double d = c.point(i)[axis] - s.point(i)[axis];
      sum += d;
      sum2 += d * d;
    }
    const double n = double(s.size());
    const double stddev = std::sqrt(sum2 / n - (sum / n) * (sum / n));
    EXPECT_NEAR(stddev / expected, 1.0, 0.1);
  }
  EXPECT_EQ(c.normals(), s.normals());
}

TEST(corrupt, gradient_density_keep_rate_is_linear) {
  // Uniform points on a line along x; chi-square of kept counts per bin
  // against the expected 0.1 + 0.9 t keep probability.
  const std::size_t n = 100000;
  std::vector<Vec3> line(n), normals(n, Vec3(0, 0, 1));
  for (std::size_t i = 0; i < n; ++i) line[i] = Vec3(double(i) / double(n - 1), 0, 0);
  const PointCloud cloud(line, normals);
  const auto kept = corrupt(cloud, 0.0, DensityPattern::gradient, 17);

  constexpr int bins = 10;
  std::array<double, bins> observed{};
  for (const auto& p : kept.points()) observed[std::min(bins - 1, int(p.x() * bins))] += 1;
  double chi2 = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double t = (b + 0.5) / bins;
    const double expected = (0.1 + 0.9 * t) * double(n) / bins;
    chi2 += (observed[b] - expected) * (observed[b] - expected) / expected;
  }
  // 99.9% quantile of chi-square with 10 degrees of freedom.
  EXPECT_LT(chi2, 29.59);
}
