#include "nf/ngl/sampler.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "nf/common.hpp"

namespace nf::ngl {

QuerySampler::QuerySampler(const pointcloud::SpatialIndex& index, std::size_t sigma_rank,
                           std::uint64_t seed, double sigma_floor)
    : index_(&index), rng_(seed) {
  if (index.size() == 0) throw InvalidArgument("query sampler needs a non-empty cloud");
  if (sigma_rank < 1) throw InvalidArgument("sigma rank must be >= 1");
  if (index.size() <= sigma_rank) {
    spdlog::warn("cloud has {} points, fewer than sigma rank {} + 1; using the farthest neighbor",
                 index.size(), sigma_rank);
  }
  sigmas_.resize(index.size());
  std::vector<pointcloud::Neighbor> nn;
  for (std::size_t i = 0; i < index.size(); ++i) {
    // The point itself comes back first at distance 0.
    index.knn(index.point(i), sigma_rank + 1, nn);
    sigmas_[i] = std::max(nn.back().distance, sigma_floor);
  }
}

double QuerySampler::mean_sigma() const {
  double s = 0.0;
  for (double v : sigmas_) s += v;
  return s / static_cast<double>(sigmas_.size());
}

Eigen::Matrix3Xd QuerySampler::sample(std::size_t count) {
  std::uniform_int_distribution<std::size_t> pick(0, index_->size() - 1);
  std::normal_distribution<double> gauss;
  Eigen::Matrix3Xd out(3, static_cast<Eigen::Index>(count));
  sources_.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto src = pick(rng_);
    sources_[i] = src;
    const double s = sigmas_[src];
    const double a = gauss(rng_), b = gauss(rng_), c = gauss(rng_);
    out.col(static_cast<Eigen::Index>(i)) = index_->point(src) + s * Vec3(a, b, c);
  }
  return out;
}

}  // namespace nf::ngl
