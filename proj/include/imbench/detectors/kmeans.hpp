#pragma once

#include <algorithm>
#include <limits>
#include <numeric>

#include "imbench/core.hpp"
#include "imbench/detectors/model.hpp"
#include "imbench/random.hpp"

namespace imbench {

struct KMeansOptions {
  std::size_t n_clusters = 8;
  std::size_t n_init = 10;
  std::size_t max_iter = 300;
  double tol = 1e-4;  // relative to the mean per-feature variance
  std::uint64_t seed = 0;
};

struct KMeansResult {
  Matrix centers;
  std::vector<std::size_t> labels;
  double inertia = 0.0;
  std::size_t iterations = 0;
};

namespace detail {

inline std::size_t nearest_center(std::span<const double> x, const Matrix& centers, double* d2_out) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    const double d2 = squared_distance(x, centers.row(c));
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  if (d2_out) *d2_out = best_d2;
  return best;
}

/// k-means++ seeding: each new centre is drawn with probability proportional
/// to the squared distance to the closest centre chosen so far.
inline Matrix kmeans_plus_plus(const Matrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows();
  Matrix centers(k, x.cols());
  std::vector<double> closest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(rng.below(n));
  for (std::size_t c = 0; c < k; ++c) {
    auto src = x.row(pick);
    std::copy(src.begin(), src.end(), centers.row(c).begin());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      closest[i] = std::min(closest[i], squared_distance(x.row(i), centers.row(c)));
      total += closest[i];
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      pick = static_cast<std::size_t>(rng.below(n));
      continue;
    }
    const double target = rng.uniform() * total;
    double acc = 0.0;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += closest[i];
      if (acc > target) {
        pick = i;
        break;
      }
    }
  }
  return centers;
}

inline KMeansResult lloyd(const Matrix& x, Matrix centers, std::size_t max_iter, double tol_abs) {
  const std::size_t n = x.rows(), k = centers.rows(), d = x.cols();
  KMeansResult r;
  r.labels.assign(n, 0);
  std::vector<double> d2(n);
  std::vector<std::size_t> counts(k);
  Matrix sums(k, d);
  for (std::size_t it = 0; it < max_iter; ++it) {
    r.iterations = it + 1;
    for (std::size_t i = 0; i < n; ++i) r.labels[i] = nearest_center(x.row(i), centers, &d2[i]);

    std::fill(counts.begin(), counts.end(), 0);
    std::fill(sums.data().begin(), sums.data().end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[r.labels[i]];
      auto s = sums.row(r.labels[i]);
      auto p = x.row(i);
      for (std::size_t j = 0; j < d; ++j) s[j] += p[j];
    }
    // Empty clusters are re-seeded at the points farthest from their centres.
    std::vector<std::size_t> by_distance;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      if (by_distance.empty()) {
        by_distance.resize(n);
        std::iota(by_distance.begin(), by_distance.end(), 0);
        std::stable_sort(by_distance.begin(), by_distance.end(),
                         [&](std::size_t a, std::size_t b) { return d2[a] > d2[b]; });
      }
      for (std::size_t idx : by_distance) {
        const std::size_t from = r.labels[idx];
        if (counts[from] <= 1) continue;
        --counts[from];
        auto s_from = sums.row(from);
        auto p = x.row(idx);
        for (std::size_t j = 0; j < d; ++j) s_from[j] -= p[j];
        auto s_to = sums.row(c);
        std::copy(p.begin(), p.end(), s_to.begin());
        counts[c] = 1;
        r.labels[idx] = c;
        d2[idx] = 0.0;
        break;
      }
      if (counts[c] == 0) throw FitFailure("k-means: cannot populate empty cluster");
    }

    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      auto cc = centers.row(c);
      auto s = sums.row(c);
      for (std::size_t j = 0; j < d; ++j) {
        const double v = s[j] / static_cast<double>(counts[c]);
        shift += (v - cc[j]) * (v - cc[j]);
        cc[j] = v;
      }
    }
    if (shift <= tol_abs) break;
  }
  r.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dd;
    r.labels[i] = nearest_center(x.row(i), centers, &dd);
    r.inertia += dd;
  }
  r.centers = std::move(centers);
  return r;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding; the lowest-inertia restart wins
/// (earliest restart on ties).
inline KMeansResult kmeans(const Matrix& x, const KMeansOptions& opt) {
  const std::size_t n = x.rows(), d = x.cols();
  if (opt.n_clusters < 1) throw FitFailure("k-means: n_clusters must be >= 1");
  if (n < opt.n_clusters)
    throw FitFailure("k-means: " + std::to_string(n) + " points for " +
                     std::to_string(opt.n_clusters) + " clusters");

  double mean_var = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x(i, j);
    m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) v += (x(i, j) - m) * (x(i, j) - m);
    mean_var += v / static_cast<double>(n);
  }
  mean_var /= static_cast<double>(std::max<std::size_t>(d, 1));
  const double tol_abs = opt.tol * mean_var;

  KMeansResult best;
  bool have = false;
  for (std::size_t run = 0; run < std::max<std::size_t>(opt.n_init, 1); ++run) {
    Rng rng(derive_seed(opt.seed, {tag("kmeans-init"), run}));
    auto r = detail::lloyd(x, detail::kmeans_plus_plus(x, opt.n_clusters, rng), opt.max_iter, tol_abs);
    if (!have || r.inertia < best.inertia) {
      best = std::move(r);
      have = true;
    }
  }
  return best;
}

}  // namespace imbench
