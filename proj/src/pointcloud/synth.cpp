#include "nf/pointcloud/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace nf::pointcloud {

ShapeKind parse_shape_kind(std::string_view name) {
  if (name == "sphere") return ShapeKind::sphere;
  if (name == "cube") return ShapeKind::cube;
  if (name == "torus") return ShapeKind::torus;
  throw InvalidArgument("unknown shape kind '" + std::string(name) + "'");
}

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::sphere: return "sphere";
    case ShapeKind::cube: return "cube";
    case ShapeKind::torus: return "torus";
  }
  return "unknown";
}

DensityPattern parse_density(std::string_view name) {
  if (name == "none") return DensityPattern::none;
  if (name == "gradient") return DensityPattern::gradient;
  throw InvalidArgument("unknown density pattern '" + std::string(name) + "'");
}

namespace {

using Rng = std::mt19937_64;

void sample_sphere(Rng& rng, std::size_t n, std::vector<Vec3>& pts, std::vector<Vec3>& nrm) {
  std::normal_distribution<double> gauss;
  while (pts.size() < n) {
    const Vec3 g(gauss(rng), gauss(rng), gauss(rng));
    const double len = g.norm();
    if (len < 1e-12) continue;
    const Vec3 p = g / len;
    pts.push_back(p);
    nrm.push_back(p);
  }
}

void sample_cube(Rng& rng, std::size_t n, std::vector<Vec3>& pts, std::vector<Vec3>& nrm) {
  std::uniform_int_distribution<int> face(0, 5);
  std::uniform_real_distribution<double> coord(-0.5, 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    const int f = face(rng);
    const int axis = f / 2;
    const double sign = (f % 2 == 0) ? 1.0 : -1.0;
    Vec3 p(coord(rng), coord(rng), coord(rng));
    p[axis] = 0.5 * sign;
    Vec3 normal = Vec3::Zero();
    normal[axis] = sign;
    pts.push_back(p);
    nrm.push_back(normal);
  }
}

void sample_torus(Rng& rng, std::size_t n, std::vector<Vec3>& pts, std::vector<Vec3>& nrm) {
  constexpr double R = kTorusMajorRadius;
  constexpr double r = kTorusMinorRadius;
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (pts.size() < n) {
    const double theta = angle(rng);
    const double phi = angle(rng);
    // Area element is proportional to R + r cos(phi).
    if (unit(rng) * (R + r) > R + r * std::cos(phi)) continue;
    const Vec3 normal(std::cos(phi) * std::cos(theta), std::cos(phi) * std::sin(theta),
                      std::sin(phi));
    const Vec3 center(R * std::cos(theta), R * std::sin(theta), 0.0);
    pts.push_back(center + r * normal);
    nrm.push_back(normal);
  }
}

}  // namespace

PointCloud synth_shape(ShapeKind kind, std::size_t n, std::uint64_t seed) {
  if (n < 4) throw InvalidArgument("synth_shape needs at least 4 points");
  Rng rng(seed);
  std::vector<Vec3> pts, nrm;
  pts.reserve(n);
  nrm.reserve(n);
  switch (kind) {
    case ShapeKind::sphere: sample_sphere(rng, n, pts, nrm); break;
    case ShapeKind::cube: sample_cube(rng, n, pts, nrm); break;
    case ShapeKind::torus: sample_torus(rng, n, pts, nrm); break;
  }
  return PointCloud(std::move(pts), std::move(nrm));
}

PointCloud corrupt(const PointCloud& cloud, double noise_fraction, DensityPattern density,
                   std::uint64_t seed) {
  if (!(noise_fraction >= 0.0)) throw InvalidArgument("noise fraction must be >= 0");
  if (noise_fraction == 0.0 && density == DensityPattern::none) return cloud;

  Rng rng(seed);
  std::vector<std::size_t> kept;
  kept.reserve(cloud.size());
  if (density == DensityPattern::gradient) {
    double lo = cloud.point(0).x(), hi = lo;
    for (const auto& p : cloud.points()) {
      lo = std::min(lo, p.x());
      hi = std::max(hi, p.x());
    }
    const double span = hi - lo;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const double t = span > 0.0 ? (cloud.point(i).x() - lo) / span : 1.0;
      if (unit(rng) < 0.1 + 0.9 * t) kept.push_back(i);
    }
    if (kept.empty()) kept.push_back(0);
  } else {
    for (std::size_t i = 0; i < cloud.size(); ++i) kept.push_back(i);
  }

  const double sigma = noise_fraction * bounding_box_diagonal(cloud);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vec3> pts;
  pts.reserve(kept.size());
  std::optional<std::vector<Vec3>> nrm;
  if (cloud.has_normals()) nrm.emplace();
  for (auto i : kept) {
    Vec3 p = cloud.point(i);
    if (sigma > 0.0) p += sigma * Vec3(gauss(rng), gauss(rng), gauss(rng));
    pts.push_back(p);
    if (nrm) nrm->push_back(cloud.normals()[i]);
  }
  return PointCloud(std::move(pts), std::move(nrm), cloud.transform());
}

}  // namespace nf::pointcloud
