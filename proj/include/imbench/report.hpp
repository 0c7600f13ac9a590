#pragma once

// Text artifacts produced from simulation records: CSV tables and the
// critical-difference JSON. All output is deterministic for a given record set.

#include <string>
#include <vector>

#include "json.hpp"

#include "imbench/analysis.hpp"
#include "imbench/store.hpp"

namespace imbench {

namespace detail {

inline std::string group_prefix(const GroupKey& k) {
  return csv_field(k.scenario) + "," + std::to_string(k.size) + "," + k.anomaly.key() + ",";
}

inline std::string num(double v) { return format_double(v); }

}  // namespace detail

/// scenario,n_train_nominal,anomaly,detector,n_simulations,mean_rank,
/// mean_test_aucroc,test_aucroc_p2.5,test_aucroc_p97.5
inline std::string ranks_csv(const std::vector<RankGroup>& groups) {
  std::string out =
      "scenario,n_train_nominal,anomaly,detector,n_simulations,mean_rank,mean_test_aucroc,"
      "test_aucroc_p2.5,test_aucroc_p97.5\n";
  for (const auto& g : groups) {
    for (std::size_t j = 0; j < g.detectors.size(); ++j) {
      std::vector<double> auc;
      for (const auto& row : g.test_aucroc) auc.push_back(row[j]);
      double mean = 0.0;
      for (double v : auc) mean += v / static_cast<double>(auc.size());
      out += detail::group_prefix(g.key) + g.detectors[j] + "," + std::to_string(auc.size()) + "," +
             detail::num(g.mean_rank[j]) + "," + detail::num(mean) + "," +
             detail::num(empirical_quantile(auc, 0.025)) + "," + detail::num(empirical_quantile(auc, 0.975)) + "\n";
    }
  }
  return out;
}

/// One entry per group; groups too small for the test carry a "skipped" reason.
inline nlohmann::json cd_json(const std::vector<RankGroup>& groups, double alpha = 0.05) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& g : groups) {
    nlohmann::json j{{"scenario", g.key.scenario},
                     {"n_train_nominal", g.key.size},
                     {"anomaly", g.key.anomaly.key()},
                     {"n_simulations", g.rank_matrix.size()}};
    try {
      const auto cd = critical_difference(g.detectors, g.rank_matrix, alpha);
      nlohmann::json ranks = nlohmann::json::array();
      for (std::size_t i = 0; i < cd.detectors.size(); ++i)
        ranks.push_back({{"detector", cd.detectors[i]}, {"mean_rank", cd.mean_rank[i]}});
      nlohmann::json cliques = nlohmann::json::array();
      for (const auto& grp : cd.groups) {
        nlohmann::json names = nlohmann::json::array();
        for (auto i : grp) names.push_back(cd.detectors[i]);
        cliques.push_back(names);
      }
      j["alpha"] = cd.alpha;
      j["q_alpha"] = cd.q_alpha;
      j["cd"] = cd.cd;
      j["friedman"] = {{"chi2", cd.friedman.chi2},
                       {"p_value", cd.friedman.p_value},
                       {"iman_davenport_f", cd.friedman.iman_davenport_f}};
      j["ranks"] = ranks;
      j["groups"] = cliques;
    } catch (const InvalidConfig& e) {
      j["skipped"] = e.what();
    }
    out.push_back(std::move(j));
  }
  return out;
}

/// scenario,n_train_nominal,anomaly,category,n_simulations,mean,p10,p90
inline std::string category_max_csv(const std::vector<CategoryGroup>& groups) {
  std::string out = "scenario,n_train_nominal,anomaly,category,n_simulations,mean,p10,p90\n";
  for (const auto& g : groups)
    for (const auto& c : g.categories)
      out += detail::group_prefix(g.key) + to_string(c.category) + "," + std::to_string(c.maxima.size()) + "," +
             detail::num(c.mean) + "," + detail::num(c.p10) + "," + detail::num(c.p90) + "\n";
  return out;
}

/// Pairwise two-sided Mann-Whitney tests between category maxima.
/// scenario,n_train_nominal,anomaly,category_a,category_b,u,p_value
inline std::string category_tests_csv(const std::vector<CategoryGroup>& groups) {
  std::string out = "scenario,n_train_nominal,anomaly,category_a,category_b,u,p_value\n";
  for (const auto& g : groups)
    for (std::size_t a = 0; a < g.categories.size(); ++a)
      for (std::size_t b = a + 1; b < g.categories.size(); ++b) {
        const auto t = mann_whitney(g.categories[a].maxima, g.categories[b].maxima);
        out += detail::group_prefix(g.key) + to_string(g.categories[a].category) + "," +
               to_string(g.categories[b].category) + "," + detail::num(t.u) + "," + detail::num(t.p_value) + "\n";
      }
  return out;
}

/// scenario,n_train_nominal,anomaly,detector,n_simulations,lower,upper,mse,mean_sq_rank
/// The selected-by-validation row leaves mean_sq_rank empty.
inline std::string bounds_csv(const std::vector<GeneralizationGroup>& groups) {
  std::string out = "scenario,n_train_nominal,anomaly,detector,n_simulations,lower,upper,mse,mean_sq_rank\n";
  for (const auto& g : groups) {
    auto row = [&](const PredictionBounds& b, bool with_rank) {
      out += detail::group_prefix(g.key) + b.detector + "," + std::to_string(b.differences.size()) + "," +
             detail::num(b.lower) + "," + detail::num(b.upper) + "," + detail::num(b.mse) + "," +
             (with_rank ? detail::num(b.mean_sq_rank) : "") + "\n";
    };
    for (const auto& b : g.per_detector) row(b, true);
    row(g.selected, false);
  }
  return out;
}

/// scenario,n_train_nominal,anomaly,criterion,detector,count,percent
inline std::string selection_csv(const std::vector<GeneralizationGroup>& groups) {
  std::string out = "scenario,n_train_nominal,anomaly,criterion,detector,count,percent\n";
  for (const auto& g : groups) {
    for (const auto& [criterion, freq] :
         {std::pair{"validation", &g.by_validation}, std::pair{"test", &g.by_test}})
      for (const auto& f : *freq)
        out += detail::group_prefix(g.key) + criterion + "," + f.detector + "," + std::to_string(f.count) + "," +
               std::to_string(f.percent) + "\n";
  }
  return out;
}

enum class ReportKind { Ranks, Cd, CategoryMax, Bounds, Selection };

inline const std::vector<std::pair<std::string, ReportKind>>& report_kinds() {
  static const std::vector<std::pair<std::string, ReportKind>> kinds{{"ranks", ReportKind::Ranks},
                                                                     {"cd", ReportKind::Cd},
                                                                     {"category-max", ReportKind::CategoryMax},
                                                                     {"bounds", ReportKind::Bounds},
                                                                     {"selection", ReportKind::Selection}};
  return kinds;
}

/// Writes the requested reports into out_dir and returns the files written.
inline std::vector<fs::path> write_reports(const std::vector<SimulationRecord>& records,
                                           const std::vector<ReportKind>& kinds, const fs::path& out_dir) {
  std::vector<fs::path> written;
  auto emit = [&](const char* name, const std::string& content) {
    write_atomic(out_dir / name, content);
    written.push_back(out_dir / name);
  };
  for (auto kind : kinds) {
    switch (kind) {
      case ReportKind::Ranks: emit("ranks.csv", ranks_csv(rank_detectors(records))); break;
      case ReportKind::Cd: emit("cd.json", cd_json(rank_detectors(records)).dump(2) + "\n"); break;
      case ReportKind::CategoryMax: {
        const auto groups = category_max(records);
        emit("category_max.csv", category_max_csv(groups));
        emit("category_tests.csv", category_tests_csv(groups));
        break;
      }
      case ReportKind::Bounds: emit("bounds.csv", bounds_csv(generalization_bounds(records))); break;
      case ReportKind::Selection: emit("selection.csv", selection_csv(generalization_bounds(records))); break;
    }
  }
  return written;
}

}  // namespace imbench
