#pragma once

// Isolation forest. Each tree is grown on a subsample of psi points without
// replacement, splitting a uniformly chosen non-constant feature at a
// uniform threshold, until isolation or the height limit ceil(log2 psi).
// Score = 2^(-E[h(x)] / c(psi)), where h adds c(leaf size) at each leaf.

#include <cmath>
#include <memory>
#include <numeric>
#include <string>

#include "imbench/detectors/model.hpp"
#include "imbench/random.hpp"

namespace imbench {

/// Average path length of an unsuccessful BST search over n points:
/// c(n) = 2 H(n-1) - 2 (n-1) / n, with c(0) = c(1) = 0 and exact harmonic numbers.
inline std::vector<double> average_path_lengths(std::size_t max_n) {
  std::vector<double> c(max_n + 1, 0.0);
  double harmonic = 0.0;  // H(n - 1)
  for (std::size_t n = 2; n <= max_n; ++n) {
    harmonic += 1.0 / static_cast<double>(n - 1);
    c[n] = 2.0 * harmonic - 2.0 * static_cast<double>(n - 1) / static_cast<double>(n);
  }
  return c;
}

inline double average_path_length(std::size_t n) { return average_path_lengths(n)[n]; }

struct IForestOptions {
  std::size_t n_estimators = 100;
  // Subsample size: 0 selects min(256, n); otherwise an explicit count.
  std::size_t max_samples = 0;
  double max_samples_fraction = 0.0;  // used when > 0
  std::uint64_t seed = 0;
};

class IForestModel final : public Model {
 public:
  IForestModel(const Matrix& x, const IForestOptions& opt) {
    const std::size_t n = x.rows();
    if (n < 2) throw FitFailure("IForest: needs at least 2 training points");
    if (opt.n_estimators < 1) throw FitFailure("IForest: n_estimators must be >= 1");
    if (opt.max_samples_fraction > 0.0)
      psi_ = static_cast<std::size_t>(opt.max_samples_fraction * static_cast<double>(n));
    else if (opt.max_samples > 0)
      psi_ = std::min(opt.max_samples, n);
    else
      psi_ = std::min<std::size_t>(256, n);
    if (psi_ < 2) throw FitFailure("IForest: subsample size below 2");
    height_limit_ = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(psi_))));
    c_ = average_path_lengths(psi_);
    dim_ = x.cols();

    std::vector<std::size_t> pool(n);
    trees_.resize(opt.n_estimators);
    for (std::size_t t = 0; t < opt.n_estimators; ++t) {
      Rng rng(derive_seed(opt.seed, {tag("iforest-tree"), t}));
      std::iota(pool.begin(), pool.end(), 0);
      for (std::size_t i = 0; i < psi_; ++i) {  // partial Fisher-Yates
        const auto j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(pool[i], pool[j]);
      }
      std::vector<std::size_t> sample(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(psi_));
      grow(trees_[t], x, sample, 0, sample.size(), 0, rng);
    }
  }

  std::size_t subsample_size() const noexcept { return psi_; }

  double path_length(std::span<const double> p) const {
    double total = 0.0;
    for (const auto& tree : trees_) {
      std::size_t id = 0, depth = 0;
      while (tree[id].left >= 0) {
        const Node& node = tree[id];
        id = static_cast<std::size_t>(p[node.feature] <= node.threshold ? node.left : node.right);
        ++depth;
      }
      total += static_cast<double>(depth) + c_[tree[id].size];
    }
    return total / static_cast<double>(trees_.size());
  }

  std::vector<double> score(const Matrix& x) const override {
    if (x.rows() > 0 && x.cols() != dim_) throw ShapeError("IForest: dimension mismatch");
    std::vector<double> out(x.rows());
    const double norm = c_[psi_];
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = std::exp2(-path_length(x.row(i)) / norm);
    return out;
  }

 private:
  struct Node {
    std::size_t feature = 0;
    double threshold = 0.0;
    std::int64_t left = -1, right = -1;
    std::size_t size = 0;
  };
  using Tree = std::vector<Node>;

  std::int64_t grow(Tree& tree, const Matrix& x, std::vector<std::size_t>& idx, std::size_t begin,
                    std::size_t end, std::size_t depth, Rng& rng) {
    const auto id = static_cast<std::int64_t>(tree.size());
    tree.push_back({});
    tree.back().size = end - begin;
    if (end - begin <= 1 || depth >= height_limit_) return id;

    // Candidate features: those not constant over this node.
    thread_local std::vector<std::size_t> features;
    thread_local std::vector<double> lows, highs;
    features.clear();
    lows.assign(dim_, 0.0);
    highs.assign(dim_, 0.0);
    for (std::size_t j = 0; j < dim_; ++j) {
      double lo = x(idx[begin], j), hi = lo;
      for (std::size_t i = begin + 1; i < end; ++i) {
        lo = std::min(lo, x(idx[i], j));
        hi = std::max(hi, x(idx[i], j));
      }
      lows[j] = lo;
      highs[j] = hi;
      if (hi > lo) features.push_back(j);
    }
    if (features.empty()) return id;
    const std::size_t f = features[static_cast<std::size_t>(rng.below(features.size()))];
    double threshold = rng.uniform(lows[f], highs[f]);
    const auto mid_it = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                       idx.begin() + static_cast<std::ptrdiff_t>(end),
                                       [&](std::size_t i) { return x(i, f) <= threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - idx.begin());
    if (mid == begin || mid == end) return id;  // degenerate draw at the boundary

    tree[static_cast<std::size_t>(id)].feature = f;
    tree[static_cast<std::size_t>(id)].threshold = threshold;
    const auto left = grow(tree, x, idx, begin, mid, depth + 1, rng);
    const auto right = grow(tree, x, idx, mid, end, depth + 1, rng);
    tree[static_cast<std::size_t>(id)].left = left;
    tree[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  std::size_t psi_ = 0;
  std::size_t height_limit_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> c_;
  std::vector<Tree> trees_;
};

inline std::unique_ptr<Model> fit_iforest(const Hyperparams& p, const FitInput& in) {
  IForestOptions opt;
  opt.n_estimators = static_cast<std::size_t>(hp::integer(p, "n_estimators", 100));
  opt.seed = static_cast<std::uint64_t>(hp::integer(p, "random_state", 0));
  if (auto it = p.find("max_samples"); it != p.end()) {
    if (auto* s = std::get_if<std::string>(&it->second)) {
      if (*s != "auto") throw InvalidConfig("IForest: max_samples must be 'auto' or numeric");
    } else if (auto* d = std::get_if<double>(&it->second)) {
      if (!(*d > 0.0 && *d <= 1.0)) throw InvalidConfig("IForest: max_samples fraction must lie in (0, 1]");
      opt.max_samples_fraction = *d;
    } else {
      opt.max_samples = static_cast<std::size_t>(std::get<std::int64_t>(it->second));
    }
  }
  return std::make_unique<IForestModel>(in.x, opt);
}

}  // namespace imbench
