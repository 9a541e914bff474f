#include "nf/gvo/sampling.hpp"

#include <cmath>
#include <numbers>

namespace nf::gvo {

VectorSampleSet sample_train_vectors(std::size_t count, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  VectorSampleSet set;
  set.source = SampleSource::train_uniform;
  set.candidates.resize(3, static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < set.candidates.cols(); ++i) {
    Vec3 v;
    do {
      v = Vec3(g(rng), g(rng), g(rng));
    } while (v.squaredNorm() < 1e-24);
    set.candidates.col(i) = v.normalized();
  }
  return set;
}

VectorSampleSet sample_train_vectors(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_train_vectors(count, rng);
}

std::pair<Vec3, Vec3> tangent_basis(const Vec3& n) {
  // Pick the axis least aligned with n.
  Eigen::Index axis;
  n.cwiseAbs().minCoeff(&axis);
  const Vec3 e1 = n.cross(Vec3::Unit(axis)).normalized();
  const Vec3 e2 = n.cross(e1);
  return {e1, e2};
}

VectorSampleSet sample_test_vectors(const Vec3& v0, std::size_t count, double eta,
                                    std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("need at least one test vector");
  if (std::abs(v0.norm() - 1.0) > 1e-6) throw InvalidArgument("v0 must be a unit vector");
  VectorSampleSet set;
  set.source = SampleSource::test_gaussian;
  set.center = v0;
  set.eta = eta;
  set.candidates.resize(3, static_cast<Eigen::Index>(count));
  set.candidates.col(0) = v0;
  const double sigma = eta * std::numbers::pi / 4.0;
  const auto [e1, e2] = tangent_basis(v0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (Eigen::Index i = 1; i < set.candidates.cols(); ++i) {
    const double a = sigma * g(rng);
    const double b = sigma * g(rng);
    const double theta = std::hypot(a, b);
    if (theta == 0.0) {
      set.candidates.col(i) = v0;
      continue;
    }
    const Vec3 dir = (a * e1 + b * e2) / theta;
    set.candidates.col(i) = (std::cos(theta) * v0 + std::sin(theta) * dir).normalized();
  }
  return set;
}

Eigen::Vector2d log_map(const Vec3& v0, const Vec3& v) {
  const auto [e1, e2] = tangent_basis(v0);
  const Vec3 t = v - v0 * v0.dot(v);
  const double tn = t.norm();
  if (tn == 0.0) return Eigen::Vector2d::Zero();
  const double theta = std::atan2(tn, v0.dot(v));
  return theta / tn * Eigen::Vector2d(t.dot(e1), t.dot(e2));
}

}  // namespace nf::gvo
