#pragma once

// Static 2-d tree over indexed points. Built once, queried read-only from any
// number of threads.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

#include "lrmatch/errors.hpp"
#include "lrmatch/geometry.hpp"

namespace lrmatch {

struct Neighbor {
  std::uint32_t id = 0;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

class SpatialIndex {
 public:
  SpatialIndex() = default;

  // Point i gets id i.
  explicit SpatialIndex(std::vector<Point> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::uint32_t{0});
    axis_.assign(points_.size(), 0);
    build(0, order_.size());
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  Point point(std::uint32_t id) const { return points_[id]; }

  // The min(k, size()) nearest points, by distance then ascending id.
  std::vector<Neighbor> knn(Point q, std::size_t k) const {
    if (empty()) throw EmptyNetwork();
    k = std::min(k, points_.size());
    std::vector<Neighbor> out;
    if (k == 0) return out;
    Heap heap;
    knn_search(0, order_.size(), q, k, heap);
    out.reserve(heap.size());
    while (!heap.empty()) {
      out.push_back({heap.top().second, std::sqrt(heap.top().first)});
      heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  // Every id within `radius` of q (inclusive), ascending id.
  std::vector<std::uint32_t> within(Point q, double radius) const {
    std::vector<std::uint32_t> out;
    if (empty()) return out;
    radius_search(0, order_.size(), q, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  using Entry = std::pair<double, std::uint32_t>;  // (squared distance, id)
  // Max-heap on (distance, id): the top is the current worst neighbor.
  using Heap = std::priority_queue<Entry>;

  static double coord(Point p, int axis) { return axis == 0 ? p.x : p.y; }

  void build(std::size_t lo, std::size_t hi) {
    if (hi - lo <= 1) return;
    double minx = points_[order_[lo]].x, maxx = minx;
    double miny = points_[order_[lo]].y, maxy = miny;
    for (std::size_t i = lo; i < hi; ++i) {
      const Point p = points_[order_[i]];
      minx = std::min(minx, p.x);
      maxx = std::max(maxx, p.x);
      miny = std::min(miny, p.y);
      maxy = std::max(maxy, p.y);
    }
    const int axis = (maxx - minx) >= (maxy - miny) ? 0 : 1;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return coord(points_[a], axis) < coord(points_[b], axis);
                     });
    axis_[mid] = static_cast<std::uint8_t>(axis);
    build(lo, mid);
    build(mid + 1, hi);
  }

  void knn_search(std::size_t lo, std::size_t hi, Point q, std::size_t k, Heap& heap) const {
    if (lo >= hi) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    const std::uint32_t id = order_[mid];
    const Point p = points_[id];
    const Entry e{squared_distance(p, q), id};
    if (heap.size() < k) {
      heap.push(e);
    } else if (e < heap.top()) {
      heap.pop();
      heap.push(e);
    }
    const int axis = axis_[mid];
    const double diff = coord(q, axis) - coord(p, axis);
    const bool left_first = diff < 0.0;
    if (left_first) {
      knn_search(lo, mid, q, k, heap);
    } else {
      knn_search(mid + 1, hi, q, k, heap);
    }
    // Equal distance still has to be visited: a smaller id may tie.
    if (heap.size() < k || diff * diff <= heap.top().first) {
      if (left_first) {
        knn_search(mid + 1, hi, q, k, heap);
      } else {
        knn_search(lo, mid, q, k, heap);
      }
    }
  }

  void radius_search(std::size_t lo, std::size_t hi, Point q, double r2,
                     std::vector<std::uint32_t>& out) const {
    if (lo >= hi) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    const std::uint32_t id = order_[mid];
    const Point p = points_[id];
    if (squared_distance(p, q) <= r2) out.push_back(id);
    const double diff = coord(q, axis_[mid]) - coord(p, axis_[mid]);
    if (diff <= 0.0 || diff * diff <= r2) radius_search(lo, mid, q, r2, out);
    if (diff >= 0.0 || diff * diff <= r2) radius_search(mid + 1, hi, q, r2, out);
  }

  std::vector<Point> points_;
  std::vector<std::uint32_t> order_;
  std::vector<std::uint8_t> axis_;
};

}  // namespace lrmatch
