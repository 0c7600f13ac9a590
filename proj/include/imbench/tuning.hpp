#pragma once

// Stratified k-fold cross-validation and grid search by mean validation AUCROC.

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "imbench/detectors/registry.hpp"
#include "imbench/metrics.hpp"
#include "imbench/parallel.hpp"
#include "imbench/random.hpp"

namespace imbench {

inline constexpr std::size_t kMinFaultyForCv = 5;

struct FoldPlan {
  std::size_t k = 5;
  std::vector<std::uint8_t> fold;  // fold index per training example

  std::vector<std::size_t> held_out(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
      if (fold[i] == f) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> training(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
      if (fold[i] != f) out.push_back(i);
    return out;
  }
};

/// Shuffles each class separately and deals examples round-robin, faulty
/// first, with one running counter. Per-fold faulty counts and per-fold
/// totals then each differ by at most one.
inline FoldPlan plan_folds(const LabeledDataset& train, std::uint64_t seed, std::size_t k = 5) {
  if (k < 2 || k > 255) throw InvalidConfig("fold count must lie in [2, 255]");
  auto faulty = train.indices_of(Label::Faulty);
  auto healthy = train.indices_of(Label::Healthy);
  const std::size_t minimum = std::max(kMinFaultyForCv, k);
  if (faulty.size() < minimum)
    throw InsufficientAnomalies(std::to_string(faulty.size()) + " faulty examples; cross-validation needs at least " +
                                std::to_string(minimum));
  Rng rng(derive_seed(seed, {tag("fold-plan")}));
  shuffle(std::span<std::size_t>(faulty), rng);
  shuffle(std::span<std::size_t>(healthy), rng);
  FoldPlan plan{k, std::vector<std::uint8_t>(train.size(), 0)};
  std::size_t counter = 0;
  for (auto i : faulty) plan.fold[i] = static_cast<std::uint8_t>(counter++ % k);
  for (auto i : healthy) plan.fold[i] = static_cast<std::uint8_t>(counter++ % k);
  return plan;
}

/// Cross-validated metrics of one grid point.
struct GridPointResult {
  Hyperparams hp;
  bool excluded = false;
  std::string error;  // set when excluded
  double aucroc = 0.0, fpr = 0.0, fnr = 0.0;
  double threshold = 0.0;  // mean of the per-fold thresholds
};

struct ValidationResult {
  std::string detector;
  Hyperparams hp;
  double validation_aucroc = 0.0;
  double validation_fpr = 0.0;
  double validation_fnr = 0.0;
  double validation_threshold = 0.0;
  std::size_t excluded_hp_count = 0;
  std::vector<GridPointResult> points;  // in grid order
};

/// Mean held-out metrics of one hyperparameter assignment. Throws FitError.
inline GridPointResult cross_validate(const DetectorSpec& spec, const Hyperparams& hp,
                                      const std::vector<LabeledDataset>& fold_train,
                                      const std::vector<LabeledDataset>& fold_held, double target_fpr) {
  GridPointResult r;
  r.hp = hp;
  const auto k = static_cast<double>(fold_train.size());
  for (std::size_t f = 0; f < fold_train.size(); ++f) {
    const auto model = fit(spec, hp, fold_train[f]);
    const auto scores = model.score(fold_held[f].points);
    ScoreSet set;
    for (std::size_t i = 0; i < scores.size(); ++i)
      (fold_held[f].labels[i] ? set.faulty_scores : set.healthy_scores).push_back(scores[i]);
    const auto rep = simple_predictor(set, target_fpr);
    r.aucroc += aucroc(set) / k;
    r.fpr += rep.achieved_fpr / k;
    r.fnr += rep.achieved_fnr / k;
    r.threshold += rep.threshold / k;
  }
  return r;
}

/// Evaluates every grid point by k-fold CV and keeps the one with the highest
/// mean validation AUCROC (first in grid order on ties). Grid points whose
/// fit fails on any fold are excluded.
inline ValidationResult grid_search(const DetectorSpec& spec, const LabeledDataset& train, const FoldPlan& plan,
                                    double target_fpr, std::size_t threads = 1) {
  if (plan.fold.size() != train.size()) throw ShapeError("grid_search: fold plan does not match training set");
  if (spec.grid.empty()) throw InvalidConfig("detector '" + spec.name + "' has an empty grid");
  std::vector<LabeledDataset> fold_train, fold_held;
  for (std::size_t f = 0; f < plan.k; ++f) {
    const auto tr = plan.training(f), ho = plan.held_out(f);
    fold_train.push_back(train.subset(tr));
    fold_held.push_back(train.subset(ho));
  }

  ValidationResult out;
  out.detector = spec.name;
  out.points.resize(spec.grid.size());
  parallel_for(spec.grid.size(), threads, [&](std::size_t g) {
    try {
      out.points[g] = cross_validate(spec, spec.grid[g], fold_train, fold_held, target_fpr);
    } catch (const FitError& e) {
      out.points[g].hp = spec.grid[g];
      out.points[g].excluded = true;
      out.points[g].error = e.what();
    }
  });

  std::optional<std::size_t> best;
  for (std::size_t g = 0; g < out.points.size(); ++g) {
    if (out.points[g].excluded) {
      ++out.excluded_hp_count;
      continue;
    }
    if (!best || out.points[g].aucroc > out.points[*best].aucroc) best = g;
  }
  if (!best)
    throw DetectorFailed(spec.name + ": every hyperparameter assignment failed (" + out.points.front().error + ")");
  const auto& b = out.points[*best];
  out.hp = b.hp;
  out.validation_aucroc = b.aucroc;
  out.validation_fpr = b.fpr;
  out.validation_fnr = b.fnr;
  out.validation_threshold = b.threshold;
  return out;
}

}  // namespace imbench
