#pragma once

// Exact k-nearest-neighbour search over a fixed point set.
//
// Neighbours are ordered by (squared distance, index), which makes the
// result unique even with duplicate points: the tree returns exactly what a
// brute-force scan sorted the same way would return.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <vector>

#include "imbench/core.hpp"

namespace imbench {

struct Neighbor {
  double dist2 = 0.0;
  std::size_t index = 0;

  friend bool operator<(const Neighbor& a, const Neighbor& b) noexcept {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
  }
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

class KdTree {
 public:
  explicit KdTree(const Matrix& points, std::size_t leaf_size = 16)
      : points_(&points), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
    order_.resize(points.rows());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!order_.empty()) build(0, order_.size());
  }

  std::size_t size() const noexcept { return order_.size(); }

  /// The k nearest points to q, ascending. Returns min(k, size()) entries.
  void knn(std::span<const double> q, std::size_t k, std::vector<Neighbor>& out) const {
    out.clear();
    if (k == 0 || nodes_.empty()) return;
    Heap heap;
    heap.reserve(std::min(k, size()));
    search(0, q, k, heap);
    out.assign(heap.begin(), heap.end());
    std::sort(out.begin(), out.end());
  }

  std::vector<Neighbor> knn(std::span<const double> q, std::size_t k) const {
    std::vector<Neighbor> out;
    knn(q, k, out);
    return out;
  }

 private:
  struct Node {
    std::size_t begin = 0, end = 0;
    std::size_t dim = 0;
    double split = 0.0;
    std::int64_t left = -1, right = -1;
  };

  // Max-heap on Neighbor order kept in a plain vector.
  using Heap = std::vector<Neighbor>;

  std::int64_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::int64_t>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= leaf_size_) return id;

    // Split on the dimension of largest spread at the median.
    const Matrix& p = *points_;
    std::size_t best_dim = 0;
    double best_spread = -1.0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t i = begin; i < end; ++i) {
        lo = std::min(lo, p(order_[i], j));
        hi = std::max(hi, p(order_[i], j));
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        best_dim = j;
      }
    }
    if (best_spread <= 0.0) return id;  // all points identical

    const std::size_t mid = begin + (end - begin) / 2;
    auto first = order_.begin() + static_cast<std::ptrdiff_t>(begin);
    std::nth_element(first, order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return p(a, best_dim) < p(b, best_dim); });
    const double split = p(order_[mid], best_dim);
    nodes_[static_cast<std::size_t>(id)].dim = best_dim;
    nodes_[static_cast<std::size_t>(id)].split = split;
    const auto left = build(begin, mid);
    const auto right = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  static void offer(Heap& heap, std::size_t k, const Neighbor& n) {
    if (heap.size() < k) {
      heap.push_back(n);
      std::push_heap(heap.begin(), heap.end());
    } else if (n < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = n;
      std::push_heap(heap.begin(), heap.end());
    }
  }

  void search(std::int64_t id, std::span<const double> q, std::size_t k, Heap& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.left < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        offer(heap, k, {squared_distance(q, points_->row(idx)), idx});
      }
      return;
    }
    // Left subtree holds values <= split, right holds values >= split.
    const double diff = q[node.dim] - node.split;
    const std::int64_t near = diff < 0.0 ? node.left : node.right;
    const std::int64_t far = diff < 0.0 ? node.right : node.left;
    search(near, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.front().dist2) search(far, q, k, heap);
  }

  const Matrix* points_;
  std::size_t leaf_size_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

/// Reference scan with the same ordering as KdTree::knn.
inline std::vector<Neighbor> brute_force_knn(const Matrix& points, std::span<const double> q,
                                             std::size_t k) {
  std::vector<Neighbor> all(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) all[i] = {squared_distance(q, points.row(i)), i};
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
  all.resize(k);
  return all;
}

}  // namespace imbench
