#include "nf/gvo/patch.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

namespace nf::gvo {

namespace {
constexpr double kRhoFloor = 0.0025;  // 0.05^2
}  // namespace

NeighborPatch build_patch(const pointcloud::SpatialIndex& index, std::size_t center,
                          std::size_t m) {
  if (index.size() < 2) throw InvalidArgument("patches need at least 2 points");
  if (center >= index.size()) throw InvalidArgument("patch center out of range");
  if (m < 1) throw InvalidArgument("patch size must be >= 1");
  if (index.size() < m) {
    spdlog::warn("cloud has {} points, fewer than patch size {}; using all points", index.size(), m);
  }
  const Vec3& c = index.point(center);
  auto nn = index.knn(c, m);
  // The center sorts first among its own duplicates only if it has the
  // lowest index; force it to the front.
  auto self = std::find_if(nn.begin(), nn.end(), [&](const auto& n) { return n.index == center; });
  if (self == nn.end()) {
    nn.back() = {center, 0.0};
    self = nn.end() - 1;
  }
  std::rotate(nn.begin(), self, self + 1);

  NeighborPatch patch;
  patch.center = center;
  const auto count = static_cast<Eigen::Index>(nn.size());
  patch.indices.resize(nn.size());
  patch.coords.resize(3, count);
  double radius = 0.0;
  for (Eigen::Index j = 0; j < count; ++j) {
    const auto idx = nn[static_cast<std::size_t>(j)].index;
    patch.indices[static_cast<std::size_t>(j)] = idx;
    patch.coords.col(j) = index.point(idx) - c;
    radius = std::max(radius, patch.coords.col(j).norm());
  }
  if (!(radius > 0.0)) {
    throw NumericalError("patch around point " + std::to_string(center) +
                         " has zero radius (all neighbors coincide)");
  }
  patch.scale = radius;
  patch.coords /= radius;
  patch.distances = patch.coords.colwise().norm().transpose();
  return patch;
}

Eigen::VectorXd kernel_weights(const Eigen::VectorXd& distances, double theta1, double theta2) {
  Eigen::VectorXd d(distances.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    d[i] = 1.0 / (1.0 + std::exp(-(theta1 - theta2 * distances[i])));
  }
  std::vector<double> sorted(d.data(), d.data() + d.size());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  return d / sum;
}

double delta_rho(const Eigen::Matrix3Xd& coords, const Vec3& normal) {
  const Eigen::RowVectorXd r = normal.transpose() * coords;
  return std::max(kRhoFloor, 0.3 * r.squaredNorm() / static_cast<double>(coords.cols()));
}

Eigen::VectorXd delta_targets(const Eigen::Matrix3Xd& coords, const Vec3& normal) {
  const double rho = delta_rho(coords, normal);
  Eigen::VectorXd out(coords.cols());
  for (Eigen::Index i = 0; i < coords.cols(); ++i) {
    const double r = coords.col(i).dot(normal);
    out[i] = std::exp(-(r * r) / (rho * rho));
  }
  return out;
}

double angle_between(const Vec3& a, const Vec3& b) {
  const Vec3 ua = a.normalized(), ub = b.normalized();
  return 2.0 * std::atan2((ua - ub).norm(), (ua + ub).norm());
}

}  // namespace nf::gvo
