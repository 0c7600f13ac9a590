#include <gtest/gtest.h>

#include <algorithm>

#include "imbench/tuning.hpp"

using namespace imbench;

namespace {

LabeledDataset counts_only(std::size_t n_healthy, std::size_t n_faulty) {
  LabeledDataset ds{Matrix(n_healthy + n_faulty, 1), std::vector<std::uint8_t>(n_healthy, 0), 0};
  ds.labels.resize(n_healthy + n_faulty, 1);
  for (std::size_t i = 0; i < ds.size(); ++i) ds.points(i, 0) = static_cast<double>(i);
  return ds;
}

LabeledDataset s1_train(std::size_t n_healthy, std::size_t n_faulty, std::uint64_t seed) {
  const auto dist = build_tvs(preset("S1"));
  return concatenate(sample(dist, Label::Healthy, n_healthy, seed), sample(dist, Label::Faulty, n_faulty, seed + 1));
}

std::vector<std::size_t> per_fold(const FoldPlan& plan, const LabeledDataset& ds, bool faulty_only) {
  std::vector<std::size_t> c(plan.k, 0);
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (!faulty_only || ds.labels[i]) ++c[plan.fold[i]];
  return c;
}

std::size_t spread(const std::vector<std::size_t>& v) {
  return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
}

}  // namespace

TEST(PlanFolds, TenFaultyGivesTwoEach) {
  const auto ds = counts_only(990, 10);
  const auto plan = plan_folds(ds, 1);
  EXPECT_EQ(per_fold(plan, ds, true), (std::vector<std::size_t>{2, 2, 2, 2, 2}));
  EXPECT_EQ(per_fold(plan, ds, false), (std::vector<std::size_t>{200, 200, 200, 200, 200}));
}

TEST(PlanFolds, SevenFaultyBalancedRemainder) {
  const auto ds = counts_only(500, 7);
  auto c = per_fold(plan_folds(ds, 2), ds, true);
  std::sort(c.begin(), c.end());
  EXPECT_EQ(c, (std::vector<std::size_t>{1, 1, 1, 2, 2}));
  EXPECT_LE(spread(per_fold(plan_folds(ds, 2), ds, false)), 1u);
}

TEST(PlanFolds, FiveFaultyOneEach) {
  const auto ds = counts_only(995, 5);
  const auto plan = plan_folds(ds, 3);
  EXPECT_EQ(per_fold(plan, ds, true), (std::vector<std::size_t>{1, 1, 1, 1, 1}));
  EXPECT_EQ(per_fold(plan, ds, false), (std::vector<std::size_t>{200, 200, 200, 200, 200}));
}

TEST(PlanFolds, TooFewFaulty) {
  EXPECT_THROW(plan_folds(counts_only(100, 4), 1), InsufficientAnomalies);
  EXPECT_THROW(plan_folds(counts_only(100, 5), 1, 6), InsufficientAnomalies);
  EXPECT_THROW(plan_folds(counts_only(100, 5), 1, 1), InvalidConfig);
}

TEST(PlanFolds, InvariantsOnRandomConfigurations) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t faulty = 5 + rng.below(100);
    const std::size_t healthy = rng.below(2000);
    const auto ds = counts_only(healthy, faulty);
    const auto plan = plan_folds(ds, rng());
    EXPECT_LE(spread(per_fold(plan, ds, true)), 1u);
    EXPECT_LE(spread(per_fold(plan, ds, false)), 1u);
    // Each example is held out exactly once.
    std::vector<int> seen(ds.size(), 0);
    for (std::size_t f = 0; f < plan.k; ++f) {
      for (auto i : plan.held_out(f)) ++seen[i];
      EXPECT_EQ(plan.held_out(f).size() + plan.training(f).size(), ds.size());
    }
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
  }
}

TEST(PlanFolds, DeterministicPerSeed) {
  const auto ds = counts_only(300, 12);
  EXPECT_EQ(plan_folds(ds, 9).fold, plan_folds(ds, 9).fold);
  EXPECT_NE(plan_folds(ds, 9).fold, plan_folds(ds, 10).fold);
}

TEST(GridSearch, SinglePointIsMeanOfFoldMetrics) {
  const auto train = s1_train(300, 20, 10);
  const auto plan = plan_folds(train, 11);
  const Hyperparams hp{{"n_neighbors", std::int64_t{5}}};
  const DetectorSpec spec{"knn", Category::US, {hp}};
  const auto r = grid_search(spec, train, plan, 0.05);
  EXPECT_EQ(r.hp, hp);
  EXPECT_EQ(r.excluded_hp_count, 0u);

  // Oracle: refit on each training split and score the held-out fold.
  double auc = 0.0, fpr = 0.0, fnr = 0.0;
  for (std::size_t f = 0; f < 5; ++f) {
    const auto tr = plan.training(f), ho = plan.held_out(f);
    const auto held = train.subset(ho);
    const auto model = fit(spec, hp, train.subset(tr));
    const auto s = model.score(held.points);
    ScoreSet set;
    for (std::size_t i = 0; i < s.size(); ++i) (held.labels[i] ? set.faulty_scores : set.healthy_scores).push_back(s[i]);
    auc += aucroc(set);
    const double t = threshold_for_fpr(set.healthy_scores, 0.05);
    fpr += fpr_at_threshold(set.healthy_scores, t);
    fnr += fnr_at_threshold(set.faulty_scores, t);
  }
  EXPECT_NEAR(r.validation_aucroc, auc / 5.0, 1e-12);
  EXPECT_NEAR(r.validation_fpr, fpr / 5.0, 1e-12);
  EXPECT_NEAR(r.validation_fnr, fnr / 5.0, 1e-12);
}

TEST(GridSearch, PicksHighestMeanAuc) {
  const auto train = s1_train(400, 25, 20);
  const auto plan = plan_folds(train, 21);
  const auto spec = default_spec("knn");
  const auto r = grid_search(spec, train, plan, 0.01);
  ASSERT_EQ(r.points.size(), spec.grid.size());
  double best = -1.0;
  for (const auto& p : r.points)
    if (!p.excluded) best = std::max(best, p.aucroc);
  EXPECT_EQ(r.validation_aucroc, best);
  for (const auto& p : r.points) {
    if (p.hp == r.hp) break;
    EXPECT_LT(p.aucroc, best);  // nothing earlier ties the winner
  }
}

TEST(GridSearch, TiesGoToFirstGridPoint) {
  const auto train = s1_train(200, 10, 30);
  const auto plan = plan_folds(train, 31);
  // "contamination" is accepted and ignored, so both points score identically.
  const Hyperparams a{{"contamination", 0.1}, {"n_neighbors", std::int64_t{3}}};
  const Hyperparams b{{"contamination", 0.01}, {"n_neighbors", std::int64_t{3}}};
  const auto r = grid_search({"knn", Category::US, {a, b}}, train, plan, 0.01);
  EXPECT_EQ(r.points[0].aucroc, r.points[1].aucroc);
  EXPECT_EQ(r.hp, a);
  const auto r2 = grid_search({"knn", Category::US, {b, a}}, train, plan, 0.01);
  EXPECT_EQ(r2.hp, b);
}

TEST(GridSearch, FailingPointsAreExcluded) {
  const auto train = s1_train(100, 10, 40);
  const auto plan = plan_folds(train, 41);
  const Hyperparams too_big{{"n_neighbors", std::int64_t{500}}};
  const Hyperparams fine{{"n_neighbors", std::int64_t{3}}};
  const auto r = grid_search({"knn", Category::US, {too_big, fine}}, train, plan, 0.01);
  EXPECT_EQ(r.excluded_hp_count, 1u);
  EXPECT_TRUE(r.points[0].excluded);
  EXPECT_FALSE(r.points[0].error.empty());
  EXPECT_EQ(r.hp, fine);
  EXPECT_THROW(grid_search({"knn", Category::US, {too_big}}, train, plan, 0.01), DetectorFailed);
}

TEST(GridSearch, ThreadsDoNotChangeResult) {
  const auto train = s1_train(200, 15, 50);
  const auto plan = plan_folds(train, 51);
  const auto spec = default_spec("lof");
  const auto a = grid_search(spec, train, plan, 0.01, 1);
  const auto b = grid_search(spec, train, plan, 0.01, 4);
  EXPECT_EQ(a.hp, b.hp);
  EXPECT_EQ(a.validation_aucroc, b.validation_aucroc);
  EXPECT_EQ(a.validation_threshold, b.validation_threshold);
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].aucroc, b.points[i].aucroc);
}

TEST(GridSearch, PlanMustMatchTrainingSet) {
  const auto train = s1_train(100, 10, 60);
  auto plan = plan_folds(train, 61);
  plan.fold.pop_back();
  EXPECT_THROW(grid_search(default_spec("knn"), train, plan, 0.01), ShapeError);
}
