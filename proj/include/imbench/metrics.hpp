#pragma once

// Score-based evaluation: empirical quantile thresholding, confusion rates
// at a threshold, rank-based AUCROC and the FPR/FNR trade-off curve.
//
// Conventions shared by every caller:
//   * a point is predicted faulty iff score > threshold (strict);
//   * quantiles use linear interpolation between order statistics at
//     position h = (n - 1) q (Hyndman & Fan type 7);
//   * AUCROC counts a faulty/healthy tie as one half.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "imbench/core.hpp"

namespace imbench {

struct ScoreSet {
  std::vector<double> healthy_scores;
  std::vector<double> faulty_scores;
};

struct ThresholdReport {
  double threshold = 0.0;
  double target_fpr = 0.0;
  double achieved_fpr = 0.0;
  double achieved_fnr = 0.0;
};

namespace detail {

inline void require_nonempty(std::span<const double> v, const char* what) {
  if (v.empty()) throw EmptySample(std::string(what) + ": empty sample");
}

inline void require_proportion(double q, const char* what) {
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidConfig(std::string(what) + ": proportion outside [0, 1]");
}

/// Type-7 quantile of already sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace detail

inline double empirical_quantile(std::span<const double> scores, double q) {
  detail::require_nonempty(scores, "empirical_quantile");
  detail::require_proportion(q, "empirical_quantile");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  return detail::quantile_sorted(sorted, q);
}

/// Threshold t such that about target_fpr of the healthy scores lie above it.
inline double threshold_for_fpr(std::span<const double> healthy_scores, double target_fpr) {
  detail::require_nonempty(healthy_scores, "threshold_for_fpr");
  detail::require_proportion(target_fpr, "threshold_for_fpr");
  return empirical_quantile(healthy_scores, 1.0 - target_fpr);
}

/// Fraction of healthy scores predicted faulty (score > threshold).
inline double fpr_at_threshold(std::span<const double> healthy_scores, double threshold) {
  detail::require_nonempty(healthy_scores, "fpr_at_threshold");
  const auto above = std::count_if(healthy_scores.begin(), healthy_scores.end(),
                                   [&](double s) { return s > threshold; });
  return static_cast<double>(above) / static_cast<double>(healthy_scores.size());
}

/// Fraction of faulty scores predicted healthy (score <= threshold).
inline double fnr_at_threshold(std::span<const double> faulty_scores, double threshold) {
  detail::require_nonempty(faulty_scores, "fnr_at_threshold");
  const auto missed = std::count_if(faulty_scores.begin(), faulty_scores.end(),
                                    [&](double s) { return s <= threshold; });
  return static_cast<double>(missed) / static_cast<double>(faulty_scores.size());
}

inline ThresholdReport simple_predictor(const ScoreSet& scores, double target_fpr) {
  ThresholdReport r;
  r.target_fpr = target_fpr;
  r.threshold = threshold_for_fpr(scores.healthy_scores, target_fpr);
  r.achieved_fpr = fpr_at_threshold(scores.healthy_scores, r.threshold);
  r.achieved_fnr = fnr_at_threshold(scores.faulty_scores, r.threshold);
  return r;
}

/// Twice the Mann-Whitney U statistic of faulty over healthy, i.e.
/// sum over pairs of 2 * [f > h] + [f == h]. Exact integer arithmetic.
inline std::int64_t twice_mann_whitney_u(std::span<const double> faulty,
                                         std::span<const double> healthy) {
  std::vector<double> f(faulty.begin(), faulty.end());
  std::vector<double> h(healthy.begin(), healthy.end());
  std::sort(f.begin(), f.end());
  std::sort(h.begin(), h.end());
  // Both sorted: walk faulty values in ascending order and advance two
  // cursors over healthy marking "strictly below" and "below or equal".
  std::int64_t u2 = 0;
  std::size_t lt = 0, le = 0;
  for (double v : f) {
    while (lt < h.size() && h[lt] < v) ++lt;
    if (le < lt) le = lt;
    while (le < h.size() && h[le] <= v) ++le;
    u2 += 2 * static_cast<std::int64_t>(lt) + static_cast<std::int64_t>(le - lt);
  }
  return u2;
}

inline double aucroc(std::span<const double> healthy, std::span<const double> faulty) {
  detail::require_nonempty(healthy, "aucroc (healthy)");
  detail::require_nonempty(faulty, "aucroc (faulty)");
  const std::int64_t u2 = twice_mann_whitney_u(faulty, healthy);
  return static_cast<double>(u2) /
         (2.0 * static_cast<double>(faulty.size()) * static_cast<double>(healthy.size()));
}

inline double aucroc(const ScoreSet& scores) {
  return aucroc(scores.healthy_scores, scores.faulty_scores);
}

/// (target FPR, FNR) per grid point; the grid must be strictly increasing in (0, 1).
inline std::vector<std::pair<double, double>> tradeoff_curve(const ScoreSet& scores,
                                                             std::span<const double> fpr_grid) {
  detail::require_nonempty(scores.healthy_scores, "tradeoff_curve (healthy)");
  detail::require_nonempty(scores.faulty_scores, "tradeoff_curve (faulty)");
  for (std::size_t i = 0; i < fpr_grid.size(); ++i) {
    if (!(fpr_grid[i] > 0.0 && fpr_grid[i] < 1.0))
      throw InvalidConfig("tradeoff_curve: grid values must lie in (0, 1)");
    if (i > 0 && !(fpr_grid[i] > fpr_grid[i - 1]))
      throw InvalidConfig("tradeoff_curve: grid must be strictly increasing");
  }
  std::vector<double> healthy = scores.healthy_scores;
  std::vector<double> faulty = scores.faulty_scores;
  std::sort(healthy.begin(), healthy.end());
  std::sort(faulty.begin(), faulty.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(fpr_grid.size());
  for (double target : fpr_grid) {
    const double t = detail::quantile_sorted(healthy, 1.0 - target);
    const auto missed = std::upper_bound(faulty.begin(), faulty.end(), t) - faulty.begin();
    out.emplace_back(target, static_cast<double>(missed) / static_cast<double>(faulty.size()));
  }
  return out;
}

/// Mean squared (test - validation) difference. Callers pass metrics in percent.
inline double mse(std::span<const std::pair<double, double>> pairs) {
  if (pairs.empty()) throw EmptySample("mse: empty sample");
  double s = 0.0;
  for (const auto& [validation, test] : pairs) s += (test - validation) * (test - validation);
  return s / static_cast<double>(pairs.size());
}

}  // namespace imbench
