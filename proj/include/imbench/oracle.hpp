#pragma once

// Bayes-optimal reference scorer. With both class densities known exactly,
// g(x) = log PDF_F(x) - log PDF_H(x) ranks points optimally; its ideal
// metrics for a scenario are estimated by Monte-Carlo.

#include <cstdint>
#include <span>
#include <string>

#include "imbench/metrics.hpp"
#include "imbench/parallel.hpp"
#include "imbench/random.hpp"
#include "imbench/synth.hpp"

namespace imbench {

struct GroundTruthMetrics {
  double fpr = 0.0;
  double fnr = 0.0;
  double aucroc = 0.0;
  std::size_t n_points = 0;  // per class
  double target_fpr = 0.0;
  std::uint64_t seed = 0;
};

inline double gt_score(const TvSDistribution& dist, std::span<const double> x) {
  return dist.faulty.log_pdf(x) - dist.healthy.log_pdf(x);
}

inline std::vector<double> gt_scores(const TvSDistribution& dist, const Matrix& points) {
  std::vector<double> out(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) out[i] = gt_score(dist, points.row(i));
  return out;
}

/// Seed of one Monte-Carlo batch of one class.
inline std::uint64_t gt_batch_seed(std::uint64_t seed, std::size_t batch, Label label) {
  return derive_seed(seed, {tag("gt-batch"), batch, static_cast<std::uint64_t>(label)});
}

/// Draws batches x batch_size points of each class, scores them with
/// gt_score and applies the simple predictor at target_fpr. Batches are
/// independent streams, so the result does not depend on `threads`.
inline GroundTruthMetrics estimate_gt_metrics(const TvSDistribution& dist, double target_fpr,
                                              std::size_t batches, std::size_t batch_size,
                                              std::uint64_t seed, std::size_t threads = 1) {
  if (batches < 1) throw InvalidConfig("estimate_gt_metrics: batches must be >= 1");
  if (batch_size < 2) throw InvalidConfig("estimate_gt_metrics: batch_size must be >= 2");
  if (!(target_fpr > 0.0 && target_fpr < 1.0))
    throw InvalidConfig("estimate_gt_metrics: target_fpr must lie in (0, 1)");

  const std::size_t n = batches * batch_size;
  ScoreSet scores;
  scores.healthy_scores.resize(n);
  scores.faulty_scores.resize(n);

  parallel_for(2 * batches, threads, [&](std::size_t job) {
    const std::size_t batch = job / 2;
    const Label label = (job % 2 == 0) ? Label::Healthy : Label::Faulty;
    Rng rng(gt_batch_seed(seed, batch, label));
    const auto& mix = dist.mixture(label);
    auto& pool = label == Label::Faulty ? scores.faulty_scores : scores.healthy_scores;
    std::vector<double> x(dist.dim());
    for (std::size_t i = 0; i < batch_size; ++i) {
      mix.sample_into(rng, x);
      pool[batch * batch_size + i] = gt_score(dist, x);
    }
  });

  const ThresholdReport report = simple_predictor(scores, target_fpr);
  return {report.achieved_fpr, report.achieved_fnr, aucroc(scores), n, target_fpr, seed};
}

}  // namespace imbench
