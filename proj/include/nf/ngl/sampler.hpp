#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "nf/pointcloud/spatial_index.hpp"

namespace nf::ngl {

// Query distribution: pick a cloud point uniformly, add isotropic Gaussian
// noise whose std is that point's distance to its sigma_rank-th nearest
// other point (floored at sigma_floor).
class QuerySampler {
 public:
  QuerySampler(const pointcloud::SpatialIndex& index, std::size_t sigma_rank, std::uint64_t seed,
               double sigma_floor = 1e-4);

  // Next `count` queries, 3 x count. Advances the internal generator.
  Eigen::Matrix3Xd sample(std::size_t count);

  const std::vector<double>& sigmas() const { return sigmas_; }
  double mean_sigma() const;
  const pointcloud::SpatialIndex& index() const { return *index_; }

  // Source point of each query in the last sample() call.
  const std::vector<std::size_t>& last_sources() const { return sources_; }

 private:
  const pointcloud::SpatialIndex* index_;
  std::vector<double> sigmas_;
  std::vector<std::size_t> sources_;
  std::mt19937_64 rng_;
};

}  // namespace nf::ngl
