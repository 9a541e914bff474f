#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nf/common.hpp"

namespace nf::pointcloud {

class PointCloud;

struct Neighbor {
  std::size_t index;
  double distance;
};

// Static kd-tree over a point set. Immutable once built; concurrent
// queries are safe.
//
// Results are ordered by (squared distance, index), so ties resolve to the
// lowest point index and duplicates are reported as distinct neighbors.
class SpatialIndex {
 public:
  explicit SpatialIndex(std::vector<Vec3> points);
  explicit SpatialIndex(const PointCloud& cloud);

  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  // Exactly min(k, size()) neighbors, nearest first. k == 0 yields none.
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;

  // Same as knn() but writes into a caller-owned buffer.
  void knn(const Vec3& query, std::size_t k, std::vector<Neighbor>& out) const;

 private:
  struct Node {
    // Leaf when left == -1; then [begin, end) indexes into order_.
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    int axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

// Reference O(N log N) scan with identical ordering semantics.
std::vector<Neighbor> brute_force_knn(std::span<const Vec3> points, const Vec3& query,
                                      std::size_t k);

// x minus the mean of its k nearest cloud points; clamps k to the index size.
Vec3 mean_neighbor_vector(const SpatialIndex& index, const Vec3& x, std::size_t k);

}  // namespace nf::pointcloud
