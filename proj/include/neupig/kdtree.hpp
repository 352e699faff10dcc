#pragma once

#include "neupig/common.hpp"

#include <span>
#include <vector>

namespace neupig {

template <typename T>
inline T squared_distance(const Vec3<T>& a, const Vec3<T>& b) {
  const T dx = a.x() - b.x();
  const T dy = a.y() - b.y();
  const T dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

template <typename T>
struct NearestHit {
  int index = -1;
  T sq_dist = std::numeric_limits<T>::infinity();
};

// Axis-aligned binary space partition over a static point set. Read-only
// after construction; queries are safe from many threads. Ties resolve to the
// lowest point index, matching an exhaustive scan exactly.
template <typename T>
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::span<const Vec3<T>> points, int leaf_size = 8);

  NearestHit<T> nearest(const Vec3<T>& query) const;

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

 private:
  struct Node {
    int begin = 0;
    int end = 0;
    int left = -1;
    int right = -1;
    int axis = -1;  // -1 marks a leaf
    T split = 0;
  };

  int build(int begin, int end);
  void search(int node, const Vec3<T>& q, NearestHit<T>& best) const;

  std::vector<Vec3<T>> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int leaf_size_ = 8;
};

// Exhaustive O(n) scan with the same tie-breaking rule; the reference the
// tree is tested against.
template <typename T>
NearestHit<T> nearest_brute_force(std::span<const Vec3<T>> points,
                                  const Vec3<T>& query);

}  // namespace neupig
