#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "nf/common.hpp"

namespace nf::gvo {

enum class SampleSource { train_uniform, test_gaussian };

struct VectorSampleSet {
  Eigen::Matrix3Xd candidates;
  Eigen::VectorXd predicted;  // filled by whoever scores the set
  SampleSource source = SampleSource::train_uniform;
  Vec3 center = Vec3::Zero();  // v0 for test sets
  double eta = 0.0;
};

// Normalized isotropic Gaussians.
VectorSampleSet sample_train_vectors(std::size_t count, std::mt19937_64& rng);
VectorSampleSet sample_train_vectors(std::size_t count, std::uint64_t seed);

// Candidate 0 is v0. The others are v0 moved along a geodesic by a tangent
// offset whose two components are N(0, (eta * 45 deg)^2) in radians.
VectorSampleSet sample_test_vectors(const Vec3& v0, std::size_t count, double eta,
                                    std::uint64_t seed);

// Orthonormal e1, e2 with e1 x e2 = n (n unit).
std::pair<Vec3, Vec3> tangent_basis(const Vec3& n);

// Inverse of the geodesic offset: tangent components of v relative to v0.
Eigen::Vector2d log_map(const Vec3& v0, const Vec3& v);

}  // namespace nf::gvo
