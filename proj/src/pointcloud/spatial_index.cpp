#include "nf/pointcloud/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nf/pointcloud/point_cloud.hpp"

namespace nf::pointcloud {

namespace {

constexpr std::uint32_t kLeafSize = 12;

struct Candidate {
  double d2;
  std::size_t index;
};

// Max-heap order: the worst candidate (largest distance, then largest
// index) sits on top.
bool worse(const Candidate& a, const Candidate& b) {
  return a.d2 < b.d2 || (a.d2 == b.d2 && a.index < b.index);
}

class BoundedHeap {
 public:
  explicit BoundedHeap(std::size_t k) : k_(k) { items_.reserve(k); }

  bool full() const { return items_.size() == k_; }
  double worst_d2() const { return items_.front().d2; }

  void offer(double d2, std::size_t index) {
    const Candidate c{d2, index};
    if (!full()) {
      items_.push_back(c);
      std::push_heap(items_.begin(), items_.end(), worse);
    } else if (worse(c, items_.front())) {
      std::pop_heap(items_.begin(), items_.end(), worse);
      items_.back() = c;
      std::push_heap(items_.begin(), items_.end(), worse);
    }
  }

  void drain(std::vector<Neighbor>& out) {
    std::sort_heap(items_.begin(), items_.end(), worse);
    out.clear();
    out.reserve(items_.size());
    for (const auto& c : items_) out.push_back({c.index, std::sqrt(c.d2)});
  }

 private:
  std::size_t k_;
  std::vector<Candidate> items_;
};

}  // namespace

SpatialIndex::SpatialIndex(const PointCloud& cloud) : SpatialIndex(cloud.points()) {}

SpatialIndex::SpatialIndex(std::vector<Vec3> points) : points_(std::move(points)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    root_ = build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{-1, -1, begin, end, 0, 0.0});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]], hi = lo;
  for (auto i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as leaf

  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const double split = points_[order_[mid]][axis];

  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  return id;
}

std::vector<Neighbor> SpatialIndex::knn(const Vec3& query, std::size_t k) const {
  std::vector<Neighbor> out;
  knn(query, k, out);
  return out;
}

void SpatialIndex::knn(const Vec3& query, std::size_t k, std::vector<Neighbor>& out) const {
  out.clear();
  k = std::min(k, points_.size());
  if (k == 0) return;

  BoundedHeap heap(k);
  // Explicit stack of (node, lower bound on squared distance).
  std::vector<std::pair<std::int32_t, double>> stack;
  stack.reserve(64);
  stack.emplace_back(root_, 0.0);
  while (!stack.empty()) {
    const auto [id, bound] = stack.back();
    stack.pop_back();
    // Strict comparison keeps equal-distance subtrees, which may hold a
    // lower-index tie.
    if (heap.full() && bound > heap.worst_d2()) continue;
    const Node& node = nodes_[id];
    if (node.left < 0) {
      for (auto i = node.begin; i < node.end; ++i) {
        const auto idx = order_[i];
        heap.offer((points_[idx] - query).squaredNorm(), idx);
      }
      continue;
    }
    const double diff = query[node.axis] - node.split;
    const auto near = diff < 0 ? node.left : node.right;
    const auto far = diff < 0 ? node.right : node.left;
    // Far side pushed first so the near side is explored first.
    stack.emplace_back(far, std::max(bound, diff * diff));
    stack.emplace_back(near, bound);
  }
  heap.drain(out);
}

std::vector<Neighbor> brute_force_knn(std::span<const Vec3> points, const Vec3& query,
                                      std::size_t k) {
  std::vector<Candidate> all;
  all.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    all.push_back({(points[i] - query).squaredNorm(), i});
  }
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), worse);
  std::vector<Neighbor> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back({all[i].index, std::sqrt(all[i].d2)});
  return out;
}

Vec3 mean_neighbor_vector(const SpatialIndex& index, const Vec3& x, std::size_t k) {
  const auto neighbors = index.knn(x, k);
  Vec3 mean = Vec3::Zero();
  for (const auto& n : neighbors) mean += index.point(n.index);
  mean /= static_cast<double>(neighbors.size());
  return x - mean;
}

}  // namespace nf::pointcloud
