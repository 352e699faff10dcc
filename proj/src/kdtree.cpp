#include "neupig/kdtree.hpp"

#include <algorithm>

namespace neupig {

template <typename T>
KdTree<T>::KdTree(std::span<const Vec3<T>> points, int leaf_size)
    : points_(points.begin(), points.end()), leaf_size_(std::max(1, leaf_size)) {
  order_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 2);
    build(0, static_cast<int>(points_.size()));
  }
}

template <typename T>
int KdTree<T>::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return id;

  Vec3<T> lo = points_[order_[begin]];
  Vec3<T> hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (!(hi[axis] > lo[axis])) return id;  // all points coincide

  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int a, int b) {
                     const T ca = points_[a][axis];
                     const T cb = points_[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const T split = points_[order_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

template <typename T>
void KdTree<T>::search(int id, const Vec3<T>& q, NearestHit<T>& best) const {
  const Node& node = nodes_[id];
  if (node.axis < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      const T d = squared_distance(q, points_[idx]);
      if (d < best.sq_dist || (d == best.sq_dist && idx < best.index)) {
        best.sq_dist = d;
        best.index = idx;
      }
    }
    return;
  }
  // Left holds coordinates <= split, right holds coordinates >= split.
  const T diff = q[node.axis] - node.split;
  const int near = diff < 0 ? node.left : node.right;
  const int far = diff < 0 ? node.right : node.left;
  search(near, q, best);
  // Equality keeps equidistant candidates with lower indices reachable.
  if (diff * diff <= best.sq_dist) search(far, q, best);
}

template <typename T>
NearestHit<T> KdTree<T>::nearest(const Vec3<T>& query) const {
  if (points_.empty())
    fail(ErrorKind::InvalidArgument, "nearest_neighbor: empty target");
  NearestHit<T> best;
  search(0, query, best);
  return best;
}

template <typename T>
NearestHit<T> nearest_brute_force(std::span<const Vec3<T>> points,
                                  const Vec3<T>& query) {
  if (points.empty())
    fail(ErrorKind::InvalidArgument, "nearest_neighbor: empty target");
  NearestHit<T> best;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const T d = squared_distance(query, points[i]);
    if (d < best.sq_dist) {
      best.sq_dist = d;
      best.index = static_cast<int>(i);
    }
  }
  return best;
}

template class KdTree<float>;
template class KdTree<double>;
template NearestHit<float> nearest_brute_force(std::span<const Vec3<float>>,
                                               const Vec3<float>&);
template NearestHit<double> nearest_brute_force(std::span<const Vec3<double>>,
                                                const Vec3<double>&);

}  // namespace neupig
