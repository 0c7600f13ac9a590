#pragma once

// Aggregation of simulation records: per-group ranks, Friedman/Nemenyi
// critical differences, category maxima, Mann-Whitney tests and
// validation-to-test prediction bounds. Only complete records are used.

#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "imbench/metrics.hpp"
#include "imbench/pipeline.hpp"

namespace imbench {

/// Records are grouped by (scenario, nominal size, anomaly setting).
struct GroupKey {
  std::string scenario;
  std::size_t size = 0;
  AnomalySetting anomaly;

  auto tie() const { return std::make_tuple(scenario, size, anomaly.mode, anomaly.rate, anomaly.count); }
  friend bool operator<(const GroupKey& a, const GroupKey& b) { return a.tie() < b.tie(); }
  friend bool operator==(const GroupKey& a, const GroupKey& b) { return a.tie() == b.tie(); }
};

inline std::map<GroupKey, std::vector<const SimulationRecord*>> group_records(
    const std::vector<SimulationRecord>& records) {
  std::map<GroupKey, std::vector<const SimulationRecord*>> out;
  for (const auto& r : records)
    if (r.complete()) out[{r.scenario, r.n_train_nominal, r.anomaly}].push_back(&r);
  return out;
}

/// Ranks of values where larger is better: 1 = largest, ties share the mean rank.
inline std::vector<double> descending_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

// ---- ranks -----------------------------------------------------------------

struct RankGroup {
  GroupKey key;
  std::vector<std::string> detectors;              // suite order
  std::vector<std::vector<double>> rank_matrix;    // simulation x detector
  std::vector<std::vector<double>> test_aucroc;    // simulation x detector
  std::vector<double> mean_rank;                   // per detector
};

namespace detail {

inline std::vector<std::string> suite_of(const std::vector<const SimulationRecord*>& sims) {
  std::vector<std::string> names;
  for (const auto& d : sims.front()->detectors) names.push_back(d.name);
  for (const auto* r : sims) {
    if (r->detectors.size() != names.size()) throw InvalidConfig("records use different detector suites");
    for (std::size_t j = 0; j < names.size(); ++j)
      if (r->detectors[j].name != names[j]) throw InvalidConfig("records use different detector suites");
  }
  return names;
}

}  // namespace detail

/// Per-simulation ranks by test AUCROC (1 = best), averaged per group.
inline std::vector<RankGroup> rank_detectors(const std::vector<SimulationRecord>& records) {
  std::vector<RankGroup> out;
  for (const auto& [key, sims] : group_records(records)) {
    RankGroup g{key, detail::suite_of(sims), {}, {}, {}};
    const std::size_t d = g.detectors.size();
    if (d == 0) throw EmptySample("rank_detectors: records contain no detectors");
    g.mean_rank.assign(d, 0.0);
    for (const auto* r : sims) {
      std::vector<double> auc(d);
      for (std::size_t j = 0; j < d; ++j) auc[j] = r->detectors[j].test_aucroc;
      auto ranks = descending_ranks(auc);
      for (std::size_t j = 0; j < d; ++j) g.mean_rank[j] += ranks[j];
      g.rank_matrix.push_back(std::move(ranks));
      g.test_aucroc.push_back(std::move(auc));
    }
    for (auto& m : g.mean_rank) m /= static_cast<double>(sims.size());
    out.push_back(std::move(g));
  }
  if (out.empty()) throw EmptySample("rank_detectors: no complete records");
  return out;
}

// ---- Friedman / Nemenyi ----------------------------------------------------

/// P(range of k iid standard normals <= q): k * int phi(z) [Phi(z) - Phi(z - q)]^(k-1) dz.
inline double normal_range_cdf(double q, std::size_t k) {
  if (q <= 0.0) return 0.0;
  auto Phi = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  auto f = [&](double z) {
    const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    return phi * std::pow(Phi(z) - Phi(z - q), static_cast<double>(k - 1));
  };
  const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -10.0, 10.0 + q, 15, 1e-12);
  return std::min(1.0, static_cast<double>(k) * integral);
}

/// Upper alpha quantile of the studentized range with k groups and
/// infinite degrees of freedom.
inline double studentized_range_quantile(std::size_t k, double alpha) {
  if (k < 2) throw InvalidConfig("studentized range needs k >= 2");
  double lo = 0.0, hi = 10.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (normal_range_cdf(mid, k) < 1.0 - alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Nemenyi critical value q_alpha (studentized range divided by sqrt 2).
inline double nemenyi_q(std::size_t k, double alpha = 0.05) {
  return studentized_range_quantile(k, alpha) / std::sqrt(2.0);
}

inline double nemenyi_cd(std::size_t k, std::size_t n, double alpha = 0.05) {
  return nemenyi_q(k, alpha) * std::sqrt(static_cast<double>(k * (k + 1)) / (6.0 * static_cast<double>(n)));
}

struct FriedmanResult {
  double chi2 = 0.0;
  double p_value = 1.0;
  double iman_davenport_f = 0.0;
};

inline FriedmanResult friedman(const std::vector<std::vector<double>>& rank_matrix) {
  const std::size_t n = rank_matrix.size();
  if (n == 0) throw EmptySample("friedman: no simulations");
  const std::size_t k = rank_matrix.front().size();
  if (k < 2) throw InvalidConfig("friedman: needs at least two detectors");
  std::vector<double> mean(k, 0.0);
  for (const auto& row : rank_matrix)
    for (std::size_t j = 0; j < k; ++j) mean[j] += row[j];
  for (auto& m : mean) m /= static_cast<double>(n);
  const double kd = static_cast<double>(k), nd = static_cast<double>(n);
  double sum_sq = 0.0;
  for (double r : mean) sum_sq += r * r;
  FriedmanResult out;
  out.chi2 = 12.0 * nd / (kd * (kd + 1.0)) * (sum_sq - kd * (kd + 1.0) * (kd + 1.0) / 4.0);
  out.chi2 = std::max(0.0, out.chi2);
  out.p_value = boost::math::gamma_q((kd - 1.0) / 2.0, out.chi2 / 2.0);
  const double denom = nd * (kd - 1.0) - out.chi2;
  out.iman_davenport_f = denom > 0.0 ? (nd - 1.0) * out.chi2 / denom : std::numeric_limits<double>::infinity();
  return out;
}

struct CriticalDifference {
  std::vector<std::string> detectors;  // sorted by mean rank, best first
  std::vector<double> mean_rank;       // aligned with detectors
  double cd = 0.0;
  double q_alpha = 0.0;
  double alpha = 0.05;
  std::size_t n_simulations = 0;
  FriedmanResult friedman;
  /// Maximal runs of detectors (indices into `detectors`) whose rank spread is below cd.
  std::vector<std::vector<std::size_t>> groups;
};

inline constexpr std::size_t kMinCdSimulations = 10;

inline CriticalDifference critical_difference(const std::vector<std::string>& names,
                                              const std::vector<std::vector<double>>& rank_matrix,
                                              double alpha = 0.05) {
  const std::size_t k = names.size();
  if (k < 2) throw InvalidConfig("critical_difference: needs at least two detectors");
  if (rank_matrix.size() < kMinCdSimulations)
    throw InvalidConfig("critical_difference: needs at least " + std::to_string(kMinCdSimulations) + " simulations");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidConfig("critical_difference: alpha must lie in (0, 1)");
  for (const auto& row : rank_matrix)
    if (row.size() != k) throw ShapeError("critical_difference: rank rows must have one entry per detector");

  CriticalDifference out;
  out.alpha = alpha;
  out.n_simulations = rank_matrix.size();
  out.friedman = friedman(rank_matrix);
  std::vector<double> mean(k, 0.0);
  for (const auto& row : rank_matrix)
    for (std::size_t j = 0; j < k; ++j) mean[j] += row[j];
  for (auto& m : mean) m /= static_cast<double>(rank_matrix.size());
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mean[a] < mean[b]; });
  for (auto j : order) {
    out.detectors.push_back(names[j]);
    out.mean_rank.push_back(mean[j]);
  }
  out.q_alpha = nemenyi_q(k, alpha);
  out.cd = out.q_alpha * std::sqrt(static_cast<double>(k * (k + 1)) / (6.0 * static_cast<double>(rank_matrix.size())));

  // For each start, extend while the spread stays below cd; keep runs not
  // contained in an earlier one.
  std::size_t last_end = 0;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i;
    while (j + 1 < k && out.mean_rank[j + 1] - out.mean_rank[i] < out.cd) ++j;
    if (i == 0 || j + 1 > last_end) {
      std::vector<std::size_t> g;
      for (std::size_t t = i; t <= j; ++t) g.push_back(t);
      out.groups.push_back(std::move(g));
      last_end = j + 1;
    }
  }
  return out;
}

// ---- category maxima -------------------------------------------------------

struct CategorySummary {
  Category category = Category::US;
  std::vector<double> maxima;  // one per simulation
  double mean = 0.0, p10 = 0.0, p90 = 0.0;
};

struct CategoryGroup {
  GroupKey key;
  std::vector<CategorySummary> categories;  // US, SS, FS order; absent categories omitted
};

/// Per simulation and category, the best test AUCROC among that category's detectors.
inline std::vector<CategoryGroup> category_max(const std::vector<SimulationRecord>& records) {
  std::vector<CategoryGroup> out;
  for (const auto& [key, sims] : group_records(records)) {
    CategoryGroup g{key, {}};
    for (Category c : {Category::US, Category::SS, Category::FS}) {
      CategorySummary s{c, {}};
      for (const auto* r : sims) {
        double best = -1.0;
        for (const auto& d : r->detectors)
          if (d.category == c) best = std::max(best, d.test_aucroc);
        if (best >= 0.0) s.maxima.push_back(best);
      }
      if (s.maxima.empty()) continue;
      for (double v : s.maxima) s.mean += v / static_cast<double>(s.maxima.size());
      s.p10 = empirical_quantile(s.maxima, 0.10);
      s.p90 = empirical_quantile(s.maxima, 0.90);
      g.categories.push_back(std::move(s));
    }
    out.push_back(std::move(g));
  }
  return out;
}

// ---- Mann-Whitney ----------------------------------------------------------

struct MannWhitneyResult {
  double u = 0.0;  // pairs with a > b, ties counted one half
  double z = 0.0;
  double p_value = 1.0;
};

/// Two-sided Mann-Whitney U test, normal approximation with tie and
/// continuity corrections.
inline MannWhitneyResult mann_whitney(std::span<const double> a, std::span<const double> b) {
  detail::require_nonempty(a, "mann_whitney (first sample)");
  detail::require_nonempty(b, "mann_whitney (second sample)");
  MannWhitneyResult out;
  out.u = static_cast<double>(twice_mann_whitney_u(a, b)) / 2.0;
  const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size()), n = n1 + n2;
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  double ties = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j] == all[i]) ++j;
    const double t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
  if (!(var > 0.0)) return out;
  const double dev = std::max(0.0, std::abs(out.u - n1 * n2 / 2.0) - 0.5);
  out.z = dev / std::sqrt(var);
  out.p_value = std::min(1.0, std::erfc(out.z / std::sqrt(2.0)));
  return out;
}

// ---- generalization bounds -------------------------------------------------

struct PredictionBounds {
  std::string detector;  // or "selected-by-validation"
  std::vector<double> differences;  // test - validation AUCROC, one per simulation
  double lower = 0.0, upper = 0.0;  // 2.5th and 97.5th percentiles
  double mse = 0.0;                 // mean squared difference
  double mean_sq_rank = 0.0;        // average rank by squared error (1 = smallest)
};

struct SelectionFrequency {
  std::string detector;
  std::size_t count = 0;
  int percent = 0;  // rounded to the nearest integer
};

struct GeneralizationGroup {
  GroupKey key;
  std::vector<PredictionBounds> per_detector;
  PredictionBounds selected;
  std::vector<SelectionFrequency> by_validation;  // most frequent first
  std::vector<SelectionFrequency> by_test;
};

inline constexpr const char* kSelectedByValidation = "selected-by-validation";

namespace detail {

inline void finish_bounds(PredictionBounds& b) {
  b.lower = empirical_quantile(b.differences, 0.025);
  b.upper = empirical_quantile(b.differences, 0.975);
  std::vector<std::pair<double, double>> pairs;
  for (double d : b.differences) pairs.emplace_back(0.0, d);
  b.mse = imbench::mse(pairs);
}

inline std::size_t argmax_first(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline std::vector<SelectionFrequency> frequencies(const std::vector<std::string>& names,
                                                   const std::vector<std::size_t>& picks) {
  std::vector<SelectionFrequency> out;
  for (const auto& n : names) out.push_back({n, 0, 0});
  for (auto p : picks) ++out[p].count;
  for (auto& f : out)
    f.percent = static_cast<int>(std::lround(100.0 * static_cast<double>(f.count) / static_cast<double>(picks.size())));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.count > b.count; });
  return out;
}

}  // namespace detail

inline std::vector<GeneralizationGroup> generalization_bounds(const std::vector<SimulationRecord>& records) {
  std::vector<GeneralizationGroup> out;
  for (const auto& [key, sims] : group_records(records)) {
    const auto names = detail::suite_of(sims);
    const std::size_t d = names.size();
    GeneralizationGroup g;
    g.key = key;
    g.per_detector.resize(d);
    for (std::size_t j = 0; j < d; ++j) g.per_detector[j].detector = names[j];
    g.selected.detector = kSelectedByValidation;
    std::vector<std::size_t> val_picks, test_picks;
    for (const auto* r : sims) {
      std::vector<double> val(d), test(d), neg_sq(d);
      for (std::size_t j = 0; j < d; ++j) {
        val[j] = r->detectors[j].validation_aucroc;
        test[j] = r->detectors[j].test_aucroc;
        const double diff = test[j] - val[j];
        g.per_detector[j].differences.push_back(diff);
        neg_sq[j] = -diff * diff;
      }
      const auto ranks = descending_ranks(neg_sq);
      for (std::size_t j = 0; j < d; ++j) g.per_detector[j].mean_sq_rank += ranks[j];
      const std::size_t pick = detail::argmax_first(val);
      g.selected.differences.push_back(test[pick] - val[pick]);
      val_picks.push_back(pick);
      test_picks.push_back(detail::argmax_first(test));
    }
    for (auto& b : g.per_detector) {
      b.mean_sq_rank /= static_cast<double>(sims.size());
      detail::finish_bounds(b);
    }
    detail::finish_bounds(g.selected);
    g.by_validation = detail::frequencies(names, val_picks);
    g.by_test = detail::frequencies(names, test_picks);
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace imbench
