#include "nf/eval/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "nf/eval/metrics.hpp"
#include "nf/pointcloud/io.hpp"
#include "nf/pointcloud/spatial_index.hpp"

namespace nf::eval {

namespace {

bool lex_greater(const Vec3& a, const Vec3& b) {
  for (int i = 0; i < 3; ++i) {
    if (a[i] != b[i]) return a[i] > b[i];
  }
  return false;
}

Vec3 canonical_sign(const Vec3& v) {
  const Vec3 neg = -v;
  return lex_greater(neg, v) ? neg : v;
}

}  // namespace

Vec3 pca_normal(const Eigen::Matrix3Xd& patch) {
  if (patch.cols() < 3) throw InvalidArgument("PCA needs at least 3 vectors");
  const Eigen::Matrix3d cov = patch * patch.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericalError("PCA eigensolve failed");
  const Eigen::Vector3d ev = solver.eigenvalues();  // ascending
  const double tol = 1e-12 * std::max(ev[2], 1e-300);
  if (!(ev[2] > 0.0) || ev[1] <= tol) throw InvalidArgument("PCA patch is collinear");
  Vec3 best = canonical_sign(solver.eigenvectors().col(0));
  for (int i = 1; i < 3; ++i) {
    if (ev[i] - ev[0] > tol) break;
    const Vec3 c = canonical_sign(solver.eigenvectors().col(i));
    if (lex_greater(c, best)) best = c;
  }
  return best.normalized();
}

NormalField pca_normals(const pointcloud::PointCloud& cloud, std::size_t k) {
  if (k < 3) throw InvalidArgument("PCA neighborhood must have at least 3 points");
  const pointcloud::SpatialIndex index(cloud);
  NormalField out;
  out.vectors.resize(cloud.size());
  const auto n = static_cast<std::int64_t>(cloud.size());
#pragma omp parallel
  {
    std::vector<pointcloud::Neighbor> nn;
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      index.knn(cloud.point(static_cast<std::size_t>(i)), k, nn);
      Eigen::Matrix3Xd x(3, static_cast<Eigen::Index>(nn.size()));
      for (std::size_t j = 0; j < nn.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = index.point(nn[j].index);
      const Vec3 mean = x.rowwise().mean();
      x.colwise() -= mean;
      out.vectors[static_cast<std::size_t>(i)] = pca_normal(x);
    }
  }
  return out;
}

NormalField mst_orient(const pointcloud::PointCloud& cloud, const NormalField& field,
                       const MstConfig& cfg) {
  const std::size_t n = cloud.size();
  if (field.vectors.size() != n) throw InvalidArgument("field and cloud sizes differ");
  if (cfg.k < 1) throw InvalidArgument("MST graph needs k >= 1");
  const pointcloud::SpatialIndex index(cloud);

  // Symmetric k-NN adjacency.
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& nb : index.knn(cloud.point(i), cfg.k + 1)) {
      if (nb.index == i) continue;
      adj[i].push_back(nb.index);
      adj[nb.index].push_back(i);
    }
  }
  for (auto& a : adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }

  // Connected components, labelled in order of their lowest index.
  std::vector<int> comp(n, -1);
  std::vector<std::size_t> roots;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    const int c = static_cast<int>(roots.size());
    std::size_t root = s;
    std::vector<std::size_t> stack{s};
    comp[s] = c;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      if (cloud.point(u).z() > cloud.point(root).z() ||
          (cloud.point(u).z() == cloud.point(root).z() && u < root))
        root = u;
      for (auto v : adj[u]) {
        if (comp[v] < 0) {
          comp[v] = c;
          stack.push_back(v);
        }
      }
    }
    roots.push_back(root);
  }
  if (roots.size() > 1) {
    spdlog::warn("MST graph has {} components; orienting each independently", roots.size());
  }

  NormalField out;
  out.stage = field.stage;
  out.vectors = field.vectors;
  std::vector<bool> done(n, false);
  using Item = std::tuple<double, std::size_t, std::size_t>;  // weight, child, parent
  for (auto root : roots) {
    if (out.vectors[root].z() < 0.0) out.vectors[root] = -out.vectors[root];
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    done[root] = true;
    auto push_edges = [&](std::size_t u) {
      for (auto v : adj[u]) {
        if (!done[v]) heap.emplace(1.0 - std::abs(field.vectors[u].dot(field.vectors[v])), v, u);
      }
    };
    push_edges(root);
    while (!heap.empty()) {
      const auto [w, v, u] = heap.top();
      heap.pop();
      if (done[v]) continue;
      done[v] = true;
      if (out.vectors[u].dot(out.vectors[v]) < 0.0) out.vectors[v] = -out.vectors[v];
      push_edges(v);
    }
  }
  return out;
}

std::vector<FlipVerdict> flip_rule_table(std::span<const FlipCase> cases) {
  std::vector<FlipVerdict> out;
  out.reserve(cases.size());
  for (const auto& c : cases) {
    FlipVerdict v;
    v.flipped = c.n1.dot(c.n2) < 0.0;
    v.n2 = v.flipped ? Vec3(-c.n2) : c.n2;
    v.correct = angle_error(v.n2, c.gt2, AngleMode::oriented) < 90.0;
    out.push_back(v);
  }
  return out;
}

FlipSweep flip_rule_sweep(double step_deg) {
  if (!(step_deg > 0.0)) throw InvalidArgument("sweep step must be positive");
  constexpr double kDeg = std::numbers::pi / 180.0;
  FlipSweep sweep;
  for (double bend = 0.0; bend <= 180.0 + 1e-9; bend += step_deg) {
    const Vec3 gt2(std::sin(bend * kDeg), 0, std::cos(bend * kDeg));
    for (double err = 0.0; err <= 60.0 + 1e-9; err += step_deg) {
      // Parent estimate tilted away from the child.
      const Vec3 n1(-std::sin(err * kDeg), 0, std::cos(err * kDeg));
      for (double sign : {1.0, -1.0}) sweep.cases.push_back({n1, sign * gt2, gt2});
    }
  }
  sweep.verdicts = flip_rule_table(sweep.cases);
  for (const auto& v : sweep.verdicts) sweep.failures += !v.correct;
  sweep.failure_rate = static_cast<double>(sweep.failures) / static_cast<double>(sweep.cases.size());
  return sweep;
}

void export_error_map(const pointcloud::PointCloud& cloud, std::span<const double> errors,
                      const std::filesystem::path& path) {
  if (errors.size() != cloud.size()) throw InvalidArgument("error map: length mismatch");
  std::vector<pointcloud::Rgb> colors(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const double t = std::clamp(errors[i] / 90.0, 0.0, 1.0);
    colors[i] = {static_cast<unsigned char>(std::lround(255.0 * t)), 0,
                 static_cast<unsigned char>(std::lround(255.0 * (1.0 - t)))};
  }
  pointcloud::PlyWriteOptions opts;
  opts.colors = &colors;
  opts.comments.push_back("RMSE=" + format_double(rmse(errors)));
  pointcloud::save_ply(cloud.points(), path, opts);
}

}  // namespace nf::eval
