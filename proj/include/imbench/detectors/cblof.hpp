#pragma once

// Cluster-based local outlier factor (unweighted variant).
//
// Clusters are sorted by size; the first boundary b where the b largest
// clusters hold at least alpha of the points and/or the size ratio across
// the boundary is at least beta separates "large" from "small" clusters
// (a boundary meeting both conditions is preferred, then alpha-only, then
// beta-only). A point scores its distance to the nearest large centre.

#include <algorithm>
#include <memory>
#include <numeric>

#include "imbench/detectors/kmeans.hpp"
#include "imbench/detectors/model.hpp"

namespace imbench {

struct CblofOptions {
  std::size_t n_clusters = 8;
  double alpha = 0.9;
  double beta = 5.0;
  std::uint64_t seed = 0;
};

/// Number of large clusters given cluster sizes sorted in descending order.
inline std::size_t cblof_large_count(std::span<const std::size_t> sorted_sizes, std::size_t n,
                                     double alpha, double beta) {
  std::vector<std::size_t> by_alpha, by_beta;
  std::size_t running = 0;
  for (std::size_t i = 1; i < sorted_sizes.size(); ++i) {
    running += sorted_sizes[i - 1];
    if (static_cast<double>(running) >= alpha * static_cast<double>(n)) by_alpha.push_back(i);
    if (sorted_sizes[i] == 0 ||
        static_cast<double>(sorted_sizes[i - 1]) / static_cast<double>(sorted_sizes[i]) >= beta)
      by_beta.push_back(i);
  }
  for (std::size_t a : by_alpha)
    if (std::find(by_beta.begin(), by_beta.end(), a) != by_beta.end()) return a;
  if (!by_alpha.empty()) return by_alpha.front();
  if (!by_beta.empty()) return by_beta.front();
  throw FitFailure("CBLOF: could not separate large and small clusters");
}

class CblofModel final : public Model {
 public:
  CblofModel(const Matrix& x, const CblofOptions& opt) {
    auto km = kmeans(x, {opt.n_clusters, 10, 300, 1e-4, opt.seed});
    std::vector<std::size_t> sizes(opt.n_clusters, 0);
    for (auto l : km.labels) ++sizes[l];
    std::vector<std::size_t> order(opt.n_clusters);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
    std::vector<std::size_t> sorted_sizes;
    for (auto c : order) sorted_sizes.push_back(sizes[c]);
    const std::size_t n_large = cblof_large_count(sorted_sizes, x.rows(), opt.alpha, opt.beta);
    for (std::size_t i = 0; i < n_large; ++i) large_centers_.append_row(km.centers.row(order[i]));
    n_clusters_ = opt.n_clusters;
  }

  const Matrix& large_centers() const noexcept { return large_centers_; }

  std::vector<double> score(const Matrix& x) const override {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double d2;
      detail::nearest_center(x.row(i), large_centers_, &d2);
      out[i] = std::sqrt(d2);
    }
    return out;
  }

 private:
  Matrix large_centers_;
  std::size_t n_clusters_ = 0;
};

inline std::unique_ptr<Model> fit_cblof(const Hyperparams& p, const FitInput& in) {
  CblofOptions opt;
  opt.n_clusters = static_cast<std::size_t>(hp::integer(p, "n_clusters", 8));
  opt.alpha = hp::number(p, "alpha", 0.9);
  opt.beta = hp::number(p, "beta", 5.0);
  opt.seed = static_cast<std::uint64_t>(hp::integer(p, "random_state", 0));
  return std::make_unique<CblofModel>(in.x, opt);
}

}  // namespace imbench
