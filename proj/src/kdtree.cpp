#include "airseg/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "airseg/error.hpp"

namespace airseg {

KdTree::KdTree(std::vector<Vec3> points, std::size_t leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  if (points_.empty()) throw ValidationError("nearest-neighbor index: no points");
  if (points_.size() >= std::size_t(UINT32_MAX)) {
    throw ValidationError("nearest-neighbor index: too many points");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!points_[i].allFinite()) {
      throw ValidationError("nearest-neighbor index: point " + std::to_string(i) +
                            " is not finite");
    }
  }
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
  build(0, std::uint32_t(points_.size()));
}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = std::uint32_t(nodes_.size());
  nodes_.emplace_back();
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= leaf_size_) return id;

  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all points coincide

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = points_[a][axis];
                     const double pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  Node& n = nodes_[id];
  n.axis = axis;
  n.split = split;
  n.left = left;
  n.right = right;
  return id;
}

void KdTree::search(std::uint32_t node, const Vec3& q, double& best_d2,
                    std::size_t& best) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (std::uint32_t i = n.begin; i < n.end; ++i) {
      const std::uint32_t idx = order_[i];
      const double d2 = squared_distance(q, points_[idx]);
      if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
        best_d2 = d2;
        best = idx;
      }
    }
    return;
  }
  // Left holds coordinates <= split, right holds coordinates >= split.
  const double diff = q[n.axis] - n.split;
  const std::uint32_t near = diff < 0.0 ? n.left : n.right;
  const std::uint32_t far = diff < 0.0 ? n.right : n.left;
  search(near, q, best_d2, best);
  if (diff * diff <= best_d2) search(far, q, best_d2, best);
}

Neighbor KdTree::nearest(const Vec3& query) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  std::size_t best = std::numeric_limits<std::size_t>::max();
  search(0, query, best_d2, best);
  return {best, std::sqrt(best_d2)};
}

}  // namespace airseg
