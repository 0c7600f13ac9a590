#pragma once

// One Monte-Carlo simulation: draw a training set, tune every detector by
// cross-validation, refit on the full training set, and evaluate on a fresh
// balanced test set next to the ground-truth scorer.

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "imbench/detectors/registry.hpp"
#include "imbench/oracle.hpp"
#include "imbench/tuning.hpp"

namespace imbench {

/// How many faulty training examples a simulation draws.
struct AnomalySetting {
  enum class Mode { Rate, Count };
  Mode mode = Mode::Rate;
  double rate = 0.005;
  std::size_t count = 0;

  static AnomalySetting from_rate(double r) { return {Mode::Rate, r, 0}; }
  static AnomalySetting from_count(std::size_t c) { return {Mode::Count, 0.0, c}; }

  std::size_t faulty_count(std::size_t n_train) const {
    return mode == Mode::Rate ? static_cast<std::size_t>(std::llround(rate * static_cast<double>(n_train))) : count;
  }

  /// Directory-safe key, e.g. "rate_0.005" or "count_10".
  std::string key() const {
    return mode == Mode::Rate ? "rate_" + format_double(rate) : "count_" + std::to_string(count);
  }

  friend bool operator==(const AnomalySetting&, const AnomalySetting&) = default;
};

/// Where test-set thresholds come from. TestHealthy takes the (1 - target)
/// quantile of the test healthy scores; Validation reuses the mean per-fold
/// threshold found during tuning.
enum class ThresholdMode { TestHealthy, Validation };

inline const char* to_string(ThresholdMode m) {
  return m == ThresholdMode::TestHealthy ? "test_healthy" : "validation";
}

inline ThresholdMode parse_threshold_mode(const std::string& s) {
  if (s == "test_healthy") return ThresholdMode::TestHealthy;
  if (s == "validation") return ThresholdMode::Validation;
  throw InvalidConfig("threshold_mode must be 'test_healthy' or 'validation', got '" + s + "'");
}

struct SimulationConfig {
  ScenarioSpec scenario;
  std::size_t n_train_nominal = 1000;
  std::size_t size_jitter = 2;
  AnomalySetting anomaly;
  std::size_t test_batches = 40;
  std::size_t test_batch_size = 1024;
  double test_anomaly_rate = 0.5;
  double target_fpr = 0.01;
  ThresholdMode threshold_mode = ThresholdMode::TestHealthy;
  std::size_t simulation_index = 0;
  std::uint64_t seed = 0;  // this simulation's seed, already derived from the master seed
  bool record_timing = false;
};

inline constexpr double kGtAucLow = 0.985;
inline constexpr double kGtAucHigh = 0.995;

struct DetectorOutcome {
  std::string name;
  Category category = Category::US;
  Hyperparams hp;
  double validation_aucroc = 0.0, validation_fpr = 0.0, validation_fnr = 0.0;
  double test_aucroc = 0.0, test_fpr = 0.0, test_fnr = 0.0;
  double threshold = 0.0;
  std::size_t excluded_hp_count = 0;
  std::optional<double> wall_seconds;
};

struct SimulationRecord {
  enum class Status { Complete, Excluded };

  std::string scenario;
  std::size_t n_train_nominal = 0;
  std::size_t n_train = 0;
  std::size_t n_faulty = 0;
  AnomalySetting anomaly;
  std::size_t simulation_index = 0;
  std::uint64_t seed = 0;
  double target_fpr = 0.0;
  ThresholdMode threshold_mode = ThresholdMode::TestHealthy;
  std::size_t n_test = 0;
  Status status = Status::Complete;
  std::string reason;  // "<code>: <detail>" when excluded
  double gt_aucroc = 0.0, gt_fpr = 0.0, gt_fnr = 0.0;
  bool gt_flagged = false;  // ground-truth AUCROC outside the expected band
  std::vector<DetectorOutcome> detectors;

  bool complete() const noexcept { return status == Status::Complete; }

  const DetectorOutcome* find(const std::string& name) const {
    for (const auto& d : detectors)
      if (d.name == name) return &d;
    return nullptr;
  }
};

namespace detail {

inline std::uint64_t stream(std::uint64_t seed, const char* name, std::uint64_t i = 0) {
  return derive_seed(seed, {tag(name), i});
}

/// Test set in batches, each split healthy/faulty by the test anomaly rate.
inline LabeledDataset draw_test_set(const TvSDistribution& dist, const SimulationConfig& cfg) {
  const auto faulty_per_batch =
      static_cast<std::size_t>(std::llround(cfg.test_anomaly_rate * static_cast<double>(cfg.test_batch_size)));
  LabeledDataset out{Matrix(cfg.test_batches * cfg.test_batch_size, dist.dim()), {}, cfg.seed};
  out.labels.reserve(out.points.rows());
  auto dst = out.points.data().begin();
  auto append = [&](const LabeledDataset& part) {
    dst = std::copy(part.points.data().begin(), part.points.data().end(), dst);
    out.labels.insert(out.labels.end(), part.labels.begin(), part.labels.end());
  };
  for (std::size_t b = 0; b < cfg.test_batches; ++b) {
    append(sample(dist, Label::Healthy, cfg.test_batch_size - faulty_per_batch, stream(cfg.seed, "test-healthy", b)));
    append(sample(dist, Label::Faulty, faulty_per_batch, stream(cfg.seed, "test-faulty", b)));
  }
  return out;
}

inline ScoreSet split_scores(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  ScoreSet set;
  for (std::size_t i = 0; i < scores.size(); ++i)
    (labels[i] ? set.faulty_scores : set.healthy_scores).push_back(scores[i]);
  return set;
}

inline void validate(const SimulationConfig& cfg) {
  validate(cfg.scenario);
  if (cfg.n_train_nominal <= cfg.size_jitter) throw InvalidConfig("training size must exceed the jitter");
  if (cfg.anomaly.mode == AnomalySetting::Mode::Rate && !(cfg.anomaly.rate > 0.0 && cfg.anomaly.rate < 1.0))
    throw InvalidConfig("anomaly rate must lie in (0, 1)");
  if (cfg.test_batches < 1 || cfg.test_batch_size < 2) throw InvalidConfig("test set too small");
  if (!(cfg.test_anomaly_rate > 0.0 && cfg.test_anomaly_rate < 1.0))
    throw InvalidConfig("test anomaly rate must lie in (0, 1)");
  const auto f = std::llround(cfg.test_anomaly_rate * static_cast<double>(cfg.test_batch_size));
  if (f < 1 || static_cast<std::size_t>(f) >= cfg.test_batch_size)
    throw InvalidConfig("test batches need both classes");
  if (!(cfg.target_fpr > 0.0 && cfg.target_fpr < 1.0)) throw InvalidConfig("target FPR must lie in (0, 1)");
}

}  // namespace detail

/// Runs one simulation. Failures never escape as exceptions: they mark the
/// record excluded with a reason. Configuration errors do throw.
inline SimulationRecord run_simulation(const SimulationConfig& cfg, const std::vector<DetectorSpec>& suite,
                                       std::size_t threads = 1) {
  detail::validate(cfg);
  validate(suite);

  SimulationRecord rec;
  rec.scenario = cfg.scenario.name;
  rec.n_train_nominal = cfg.n_train_nominal;
  rec.anomaly = cfg.anomaly;
  rec.simulation_index = cfg.simulation_index;
  rec.seed = cfg.seed;
  rec.target_fpr = cfg.target_fpr;
  rec.threshold_mode = cfg.threshold_mode;

  // Training size with uniform integer jitter in [-j, +j].
  Rng jitter(detail::stream(cfg.seed, "size-jitter"));
  const auto span = static_cast<std::uint64_t>(2 * cfg.size_jitter + 1);
  rec.n_train = cfg.n_train_nominal - cfg.size_jitter + static_cast<std::size_t>(jitter.below(span));
  rec.n_faulty = cfg.anomaly.faulty_count(rec.n_train);
  auto exclude = [&](const std::string& code, const std::string& detail) {
    rec.status = SimulationRecord::Status::Excluded;
    rec.reason = code + ": " + detail;
    rec.detectors.clear();
    return rec;
  };
  if (rec.n_faulty < kMinFaultyForCv)
    return exclude("insufficient-anomalies", std::to_string(rec.n_faulty) + " faulty training examples");
  if (rec.n_faulty >= rec.n_train) return exclude("insufficient-anomalies", "no healthy training examples");

  const TvSDistribution dist = build_tvs(cfg.scenario);
  const LabeledDataset train =
      concatenate(sample(dist, Label::Healthy, rec.n_train - rec.n_faulty, detail::stream(cfg.seed, "train-healthy")),
                  sample(dist, Label::Faulty, rec.n_faulty, detail::stream(cfg.seed, "train-faulty")));

  FoldPlan plan;
  try {
    plan = plan_folds(train, detail::stream(cfg.seed, "folds"));
  } catch (const InsufficientAnomalies& e) {
    return exclude("insufficient-anomalies", e.what());
  }

  const LabeledDataset test = detail::draw_test_set(dist, cfg);
  rec.n_test = test.size();

  for (const auto& spec : suite) {
    const auto start = std::chrono::steady_clock::now();
    DetectorOutcome out;
    out.name = spec.name;
    out.category = spec.category;
    try {
      const ValidationResult v = grid_search(spec, train, plan, cfg.target_fpr, threads);
      const FittedDetector model = fit(spec, v.hp, train);
      const ScoreSet set = detail::split_scores(model.score(test.points), test.labels);
      out.hp = v.hp;
      out.validation_aucroc = v.validation_aucroc;
      out.validation_fpr = v.validation_fpr;
      out.validation_fnr = v.validation_fnr;
      out.excluded_hp_count = v.excluded_hp_count;
      out.test_aucroc = aucroc(set);
      out.threshold = cfg.threshold_mode == ThresholdMode::TestHealthy
                          ? threshold_for_fpr(set.healthy_scores, cfg.target_fpr)
                          : v.validation_threshold;
      out.test_fpr = fpr_at_threshold(set.healthy_scores, out.threshold);
      out.test_fnr = fnr_at_threshold(set.faulty_scores, out.threshold);
    } catch (const DetectorFailed& e) {
      return exclude("detector-failed", e.what());
    } catch (const FitError& e) {
      return exclude("fit-error", e.what());
    }
    if (cfg.record_timing)
      out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.detectors.push_back(std::move(out));
  }

  const ScoreSet gt = detail::split_scores(gt_scores(dist, test.points), test.labels);
  const ThresholdReport gt_rep = simple_predictor(gt, cfg.target_fpr);
  rec.gt_aucroc = aucroc(gt);
  rec.gt_fpr = gt_rep.achieved_fpr;
  rec.gt_fnr = gt_rep.achieved_fnr;
  rec.gt_flagged = is_preset(cfg.scenario.name) && (rec.gt_aucroc < kGtAucLow || rec.gt_aucroc > kGtAucHigh);
  return rec;
}

}  // namespace imbench
