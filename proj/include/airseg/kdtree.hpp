#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "airseg/geometry.hpp"

namespace airseg {

struct Neighbor {
  std::size_t index = std::numeric_limits<std::size_t>::max();
  double distance = std::numeric_limits<double>::infinity();
};

// Squared Euclidean distance, evaluated in a fixed operation order so every
// caller gets bit-identical values.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

// Exact 3-d nearest-neighbor index. Ties resolve to the lowest point index.
// Immutable after construction; queries are safe from multiple threads.
class KdTree {
 public:
  // Throws ValidationError on empty input.
  explicit KdTree(std::vector<Vec3> points, std::size_t leaf_size = 12);

  Neighbor nearest(const Vec3& query) const;

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

 private:
  struct Node {
    // Leaf when axis < 0: [begin, end) into order_.
    std::int32_t axis = -1;
    double split = 0.0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::uint32_t node, const Vec3& q, double& best_d2, std::size_t& best) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

using NearestNeighborIndex = KdTree;

inline KdTree build_index(std::vector<Vec3> points) { return KdTree(std::move(points)); }

}  // namespace airseg
