#include <gtest/gtest.h>

#include <cmath>

#include "imbench/oracle.hpp"

using namespace imbench;

namespace {

double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Two unit Gaussians in one dimension, means 0 (healthy) and 2 (faulty).
// The log ratio is increasing in x, so every metric has a closed form.
TvSDistribution shifted_pair() {
  TvSDistribution d;
  d.healthy = IsotropicGaussianMixture::uniform(Matrix(1, 1, 0.0), 1.0);
  d.faulty = IsotropicGaussianMixture::uniform(Matrix(1, 1, 2.0), 1.0);
  d.scenario.name = "pair";
  d.scenario.d = 1;
  return d;
}

double direct_mixture_density(const IsotropicGaussianMixture& mix, std::span<const double> x) {
  const double dd = static_cast<double>(mix.dim());
  double p = 0.0;
  for (std::size_t c = 0; c < mix.components(); ++c)
    p += mix.weights()[c] * std::pow(2.0 * std::numbers::pi * mix.variance(), -dd / 2.0) *
         std::exp(-squared_distance(x, mix.means().row(c)) / (2.0 * mix.variance()));
  return p;
}

}  // namespace

TEST(GtScore, ZeroOnDecisionBoundary) {
  const auto dist = build_tvs(preset("S1"));
  // Along the anti-diagonal the healthy density decays while the faulty shell
  // sits at radius 1.4; bisect g between the origin and that radius.
  const double ux = 1.0 / std::sqrt(2.0), uy = -1.0 / std::sqrt(2.0);
  auto g_at = [&](double r) {
    const std::vector<double> x{r * ux, r * uy};
    return gt_score(dist, x);
  };
  double lo = 0.0, hi = 1.4;
  ASSERT_LT(g_at(lo), 0.0);
  ASSERT_GT(g_at(hi), 0.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g_at(mid) < 0.0 ? lo : hi) = mid;
  }
  EXPECT_NEAR(g_at(0.5 * (lo + hi)), 0.0, 1e-9);
}

TEST(GtScore, EqualMixturesScoreZero) {
  auto d = build_tvs(preset("S1"));
  d.faulty = d.healthy;
  const std::vector<double> x{0.3, -1.2};
  EXPECT_EQ(gt_score(d, x), 0.0);
}

TEST(GtScore, NegativeAtHealthyMode) {
  const auto dist = build_tvs(preset("S1"));
  const double a = healthy_offset(preset("S1"));
  EXPECT_LT(gt_score(dist, std::vector<double>{a, a}), 0.0);
  EXPECT_LT(gt_score(dist, std::vector<double>{0.0, 0.0}), 0.0);
}

TEST(GtScore, MatchesDirectRatio) {
  const auto dist = build_tvs(preset("S1"));
  Rng rng(4);
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    const std::vector<double> x{rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const double pf = direct_mixture_density(dist.faulty, x);
    const double ph = direct_mixture_density(dist.healthy, x);
    if (pf < 1e-200 || ph < 1e-200) continue;
    EXPECT_NEAR(gt_score(dist, x), std::log(pf / ph), 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 400);
}

TEST(GtScore, ShapeError) {
  const auto dist = build_tvs(preset("S1"));
  EXPECT_THROW(gt_score(dist, std::vector<double>{1.0}), ShapeError);
}

TEST(EstimateGt, ClosedFormShiftedPair) {
  const auto dist = shifted_pair();
  const auto m = estimate_gt_metrics(dist, 0.01, 200, 1024, 3);
  const double n = 200.0 * 1024.0;
  const double auc = Phi(2.0 / std::sqrt(2.0));
  const double fnr = Phi(2.3263478740408408 - 2.0);
  EXPECT_EQ(m.n_points, 200u * 1024u);
  EXPECT_NEAR(m.fpr, 0.01, 1.0 / n + 1e-12);
  EXPECT_NEAR(m.fnr, fnr, 4.0 * std::sqrt(fnr * (1 - fnr) / n) + 0.01);
  EXPECT_NEAR(m.aucroc, auc, 0.003);
}

TEST(EstimateGt, HalfTargetFpr) {
  const auto dist = build_tvs(preset("S1"));
  const auto m = estimate_gt_metrics(dist, 0.5, 8, 512, 1);
  EXPECT_NEAR(m.fpr, 0.5, 2.0 / std::sqrt(8.0 * 512.0));
}

TEST(EstimateGt, ThreadCountDoesNotMatter) {
  const auto dist = build_tvs(preset("S2"));
  const auto a = estimate_gt_metrics(dist, 0.01, 16, 256, 9, 1);
  const auto b = estimate_gt_metrics(dist, 0.01, 16, 256, 9, 4);
  EXPECT_EQ(a.fpr, b.fpr);
  EXPECT_EQ(a.fnr, b.fnr);
  EXPECT_EQ(a.aucroc, b.aucroc);
}

TEST(EstimateGt, MonotoneTradeoff) {
  const auto dist = build_tvs(preset("S1"));
  double prev = 2.0;
  for (double t : {0.005, 0.01, 0.05, 0.2}) {
    const auto m = estimate_gt_metrics(dist, t, 32, 1024, 5);
    EXPECT_LE(m.fnr, prev) << t;
    prev = m.fnr;
  }
}

TEST(EstimateGt, DoublingBudgetIsStable) {
  const auto dist = build_tvs(preset("S1"));
  const auto a = estimate_gt_metrics(dist, 0.01, 64, 1024, 6);
  const auto b = estimate_gt_metrics(dist, 0.01, 128, 1024, 7);
  const double n = 64.0 * 1024.0;
  const double se = std::sqrt(a.fnr * (1.0 - a.fnr) / n);
  EXPECT_LT(std::abs(a.fnr - b.fnr), 3.0 * std::sqrt(2.0) * se + 1.0 / std::sqrt(n));
}

TEST(EstimateGt, RejectsDegenerateInput) {
  const auto dist = build_tvs(preset("S1"));
  EXPECT_THROW(estimate_gt_metrics(dist, 0.01, 0, 1024, 1), InvalidConfig);
  EXPECT_THROW(estimate_gt_metrics(dist, 0.01, 1, 1, 1), InvalidConfig);
  EXPECT_THROW(estimate_gt_metrics(dist, 0.0, 1, 16, 1), InvalidConfig);
  EXPECT_THROW(estimate_gt_metrics(dist, 1.0, 1, 16, 1), InvalidConfig);
}
