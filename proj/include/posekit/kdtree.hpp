#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "posekit/rotation.hpp"

namespace posekit {

// Squared Euclidean distance, summed x, y, z in that order so every nearest
// neighbour routine returns bit-identical values.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

struct Neighbor {
  std::size_t index = 0;
  double squared_distance = std::numeric_limits<double>::infinity();
};

// Static 3-d tree over a point cloud, exact nearest-neighbour queries.
class KdTree3 {
 public:
  explicit KdTree3(std::vector<Vec3> points) : points_(std::move(points)), order_(points_.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!points_.empty()) root_ = build(0, points_.size(), 0);
  }

  std::size_t size() const { return points_.size(); }

  Neighbor nearest(const Vec3& q) const {
    Neighbor best;
    if (root_ != kNone) search(root_, q, best);
    return best;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  static constexpr std::size_t kLeafSize = 8;

  struct Node {
    std::size_t begin, end;  // range in order_
    int axis = -1;           // -1 for leaves
    double split = 0.0;
    std::size_t left = kNone, right = kNone;
  };

  std::size_t build(std::size_t begin, std::size_t end, int depth) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= kLeafSize) return id;
    // Split on the axis of largest extent.
    Vec3 lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];
    const std::size_t left = build(begin, mid, depth + 1);
    const std::size_t right = build(mid, end, depth + 1);
    Node& n = nodes_[id];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
  }

  void search(std::size_t id, const Vec3& q, Neighbor& best) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        const double d = squared_distance(q, points_[idx]);
        if (d < best.squared_distance || (d == best.squared_distance && idx < best.index)) best = {idx, d};
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::size_t near = diff < 0.0 ? n.left : n.right;
    const std::size_t far = diff < 0.0 ? n.right : n.left;
    search(near, q, best);
    if (diff * diff <= best.squared_distance) search(far, q, best);
  }

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t root_ = kNone;
};

}  // namespace posekit
