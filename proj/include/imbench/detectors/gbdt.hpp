#pragma once

// Gradient-boosted regression trees on the logistic loss (second-order,
// exact greedy splits), in the style of XGBoost's "exact" tree method.
// Leaf weight -G / (H + lambda) scaled by the learning rate; a split is kept
// when its regularised gain exceeds min_split_gain and both children carry
// at least min_child_weight hessian mass.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "imbench/detectors/model.hpp"

namespace imbench {

struct GbdtOptions {
  std::size_t rounds = 100;
  std::size_t max_depth = 3;
  double learning_rate = 0.3;
  double lambda = 1.0;
  double min_child_weight = 1.0;
  double min_split_gain = 0.0;
};

inline double sigmoid(double m) noexcept {
  return m >= 0.0 ? 1.0 / (1.0 + std::exp(-m)) : std::exp(m) / (1.0 + std::exp(m));
}

/// Mean logistic loss of margins against 0/1 labels.
inline double logistic_loss(std::span<const double> margins, std::span<const std::uint8_t> labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    const double m = margins[i];
    // log(1 + exp(-m)) for y = 1, log(1 + exp(m)) for y = 0, overflow-safe.
    const double z = labels[i] ? -m : m;
    s += z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  }
  return s / static_cast<double>(margins.size());
}

class GbdtModel final : public Model {
 public:
  GbdtModel(const Matrix& x, std::span<const std::uint8_t> labels, const GbdtOptions& opt)
      : opt_(opt), dim_(x.cols()) {
    const std::size_t n = x.rows();
    if (n == 0) throw FitFailure("GBDT: no training points");
    if (labels.size() != n) throw ShapeError("GBDT: one label per row required");

    // Per-feature row order, sorted once and reused by every node.
    sorted_.resize(dim_);
    for (std::size_t f = 0; f < dim_; ++f) {
      auto& order = sorted_[f];
      order.resize(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
    }

    std::vector<double> margin(n, 0.0), grad(n), hess(n);
    std::vector<std::int32_t> node_of(n);
    loss_history_.push_back(logistic_loss(margin, labels));
    for (std::size_t round = 0; round < opt_.rounds; ++round) {
      for (std::size_t i = 0; i < n; ++i) {
        const double p = sigmoid(margin[i]);
        grad[i] = p - static_cast<double>(labels[i]);
        hess[i] = std::max(p * (1.0 - p), 1e-16);
      }
      Tree tree = grow(x, grad, hess, node_of);
      for (std::size_t i = 0; i < n; ++i) margin[i] += predict(tree, x.row(i));
      trees_.push_back(std::move(tree));
      loss_history_.push_back(logistic_loss(margin, labels));
    }
  }

  /// Training loss before boosting and after each round.
  const std::vector<double>& loss_history() const noexcept { return loss_history_; }

  double margin(std::span<const double> p) const {
    double m = 0.0;
    for (const auto& t : trees_) m += predict(t, p);
    return m;
  }

  std::vector<double> score(const Matrix& x) const override {
    if (x.rows() > 0 && x.cols() != dim_) throw ShapeError("GBDT: dimension mismatch");
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = margin(x.row(i));
    return out;
  }

 private:
  struct Node {
    std::size_t feature = 0;
    double threshold = 0.0;
    std::int32_t left = -1, right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  static double predict(const Tree& tree, std::span<const double> p) {
    std::size_t id = 0;
    while (tree[id].left >= 0)
      id = static_cast<std::size_t>(p[tree[id].feature] < tree[id].threshold ? tree[id].left : tree[id].right);
    return tree[id].value;
  }

  double leaf_value(double g, double h) const { return -g / (h + opt_.lambda) * opt_.learning_rate; }

  double objective(double g, double h) const { return g * g / (h + opt_.lambda); }

  // Level-wise growth: every row carries its current node id.
  Tree grow(const Matrix& x, const std::vector<double>& grad, const std::vector<double>& hess,
            std::vector<std::int32_t>& node_of) const {
    const std::size_t n = x.rows();
    Tree tree(1);
    std::fill(node_of.begin(), node_of.end(), 0);
    std::vector<std::int32_t> frontier{0};
    std::vector<double> node_g(1, 0.0), node_h(1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      node_g[0] += grad[i];
      node_h[0] += hess[i];
    }

    for (std::size_t depth = 0; depth < opt_.max_depth && !frontier.empty(); ++depth) {
      const std::size_t nodes = tree.size();
      struct Best {
        double gain = 0.0;
        std::size_t feature = 0;
        double threshold = 0.0;
        bool found = false;
      };
      std::vector<Best> best(nodes);
      std::vector<double> gl(nodes), hl(nodes), last(nodes);
      std::vector<char> seen(nodes);
      for (std::size_t f = 0; f < dim_; ++f) {
        std::fill(gl.begin(), gl.end(), 0.0);
        std::fill(hl.begin(), hl.end(), 0.0);
        std::fill(seen.begin(), seen.end(), 0);
        for (std::size_t r : sorted_[f]) {
          const auto id = static_cast<std::size_t>(node_of[r]);
          if (node_of[r] < 0 || !is_open(frontier, node_of[r])) continue;
          const double v = x(r, f);
          if (seen[id] && v > last[id]) {
            // Candidate split between last[id] and v.
            const double gr = node_g[id] - gl[id], hr = node_h[id] - hl[id];
            if (hl[id] >= opt_.min_child_weight && hr >= opt_.min_child_weight) {
              const double gain = 0.5 * (objective(gl[id], hl[id]) + objective(gr, hr) -
                                         objective(node_g[id], node_h[id]));
              if (gain > opt_.min_split_gain && gain > best[id].gain) {
                best[id] = {gain, f, 0.5 * (last[id] + v), true};
                if (best[id].threshold <= last[id]) best[id].threshold = v;
              }
            }
          }
          gl[id] += grad[r];
          hl[id] += hess[r];
          last[id] = v;
          seen[id] = 1;
        }
      }

      std::vector<std::int32_t> next;
      for (auto id32 : frontier) {
        const auto id = static_cast<std::size_t>(id32);
        if (!best[id].found) continue;
        const auto left = static_cast<std::int32_t>(tree.size());
        tree.push_back({});
        tree.push_back({});
        tree[id].feature = best[id].feature;
        tree[id].threshold = best[id].threshold;
        tree[id].left = left;
        tree[id].right = left + 1;
        next.push_back(left);
        next.push_back(left + 1);
      }
      if (next.empty()) break;
      node_g.assign(tree.size(), 0.0);
      node_h.assign(tree.size(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto id = static_cast<std::size_t>(node_of[i]);
        if (tree[id].left < 0) continue;
        node_of[i] = x(i, tree[id].feature) < tree[id].threshold ? tree[id].left : tree[id].right;
        node_g[static_cast<std::size_t>(node_of[i])] += grad[i];
        node_h[static_cast<std::size_t>(node_of[i])] += hess[i];
      }
      frontier = std::move(next);
    }

    // Leaf values from the final partition.
    std::vector<double> g(tree.size(), 0.0), h(tree.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      g[static_cast<std::size_t>(node_of[i])] += grad[i];
      h[static_cast<std::size_t>(node_of[i])] += hess[i];
    }
    for (std::size_t id = 0; id < tree.size(); ++id)
      if (tree[id].left < 0) tree[id].value = leaf_value(g[id], h[id]);
    return tree;
  }

  static bool is_open(const std::vector<std::int32_t>& frontier, std::int32_t id) {
    return std::binary_search(frontier.begin(), frontier.end(), id);
  }

  GbdtOptions opt_;
  std::size_t dim_;
  std::vector<std::vector<std::size_t>> sorted_;
  std::vector<Tree> trees_;
  std::vector<double> loss_history_;
};

inline GbdtOptions gbdt_options_from(const Hyperparams& p) {
  GbdtOptions opt;
  opt.rounds = static_cast<std::size_t>(hp::integer(p, "n_estimators", 100));
  opt.max_depth = static_cast<std::size_t>(hp::integer(p, "max_depth", 3));
  opt.learning_rate = hp::number(p, "learning_rate", 0.3);
  opt.lambda = hp::number(p, "reg_lambda", 1.0);
  opt.min_child_weight = hp::number(p, "min_child_weight", 1.0);
  return opt;
}

inline std::unique_ptr<Model> fit_xgb(const Hyperparams& p, const FitInput& in) {
  return std::make_unique<GbdtModel>(in.x, in.labels, gbdt_options_from(p));
}

}  // namespace imbench
