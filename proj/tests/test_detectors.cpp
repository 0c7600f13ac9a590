#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "imbench/detectors/registry.hpp"
#include "imbench/metrics.hpp"

using namespace imbench;

namespace {

Matrix gaussian_points(std::size_t n, std::size_t d, std::uint64_t seed, double shift = 0.0) {
  Rng rng(seed);
  Matrix m(n, d);
  for (auto& v : m.data()) v = rng.normal() + shift;
  return m;
}

LabeledDataset labelled(const Matrix& healthy, const Matrix& faulty) {
  LabeledDataset out;
  for (std::size_t i = 0; i < healthy.rows(); ++i) {
    out.points.append_row(healthy.row(i));
    out.labels.push_back(0);
  }
  for (std::size_t i = 0; i < faulty.rows(); ++i) {
    out.points.append_row(faulty.row(i));
    out.labels.push_back(1);
  }
  return out;
}

DetectorSpec spec_of(const std::string& name) { return default_spec(name); }

// Small representative assignment per detector.
Hyperparams quick_hp(const std::string& name) {
  if (name == "knn" || name == "lof") return {{"n_neighbors", std::int64_t{5}}};
  if (name == "cblof") return {{"n_clusters", std::int64_t{10}}, {"random_state", std::int64_t{0}}};
  if (name == "iforest") return {{"n_estimators", std::int64_t{50}}, {"random_state", std::int64_t{1}}};
  if (name == "ocsvm") return {{"kernel", std::string("rbf")}, {"gamma", std::string("scale")}, {"nu", 0.5}};
  if (name == "svm") return {{"kernel", std::string("rbf")}, {"gamma", std::string("scale")}, {"c", 1.0}};
  if (name == "xgb") return {{"n_estimators", std::int64_t{30}}};
  return {{"random_state", std::int64_t{1}}, {"n_estimators", std::int64_t{30}}};
}

// Local outlier factor of query q against training points, written directly
// from the definition with exactly k neighbours (ties broken by index).
double lof_oracle(const Matrix& train, std::span<const double> q, std::size_t k) {
  const std::size_t n = train.rows();
  auto neighbours = [&](std::span<const double> p, bool skip, std::size_t self) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < n; ++i) {
      if (skip && i == self) continue;
      all.emplace_back(std::sqrt(squared_distance(p, train.row(i))), i);
    }
    std::sort(all.begin(), all.end());
    all.resize(k);
    return all;
  };
  std::vector<double> kdist(n);
  std::vector<std::vector<std::pair<double, std::size_t>>> nb(n);
  for (std::size_t i = 0; i < n; ++i) {
    nb[i] = neighbours(train.row(i), true, i);
    kdist[i] = nb[i].back().first;
  }
  auto lrd_of = [&](const std::vector<std::pair<double, std::size_t>>& list) {
    double s = 0.0;
    for (const auto& [dist, o] : list) s += std::max(kdist[o], dist);
    return 1.0 / (s / static_cast<double>(k));
  };
  const auto qn = neighbours(q, false, 0);
  double mean_lrd = 0.0;
  for (const auto& [dist, o] : qn) mean_lrd += lrd_of(nb[o]) / static_cast<double>(k);
  return mean_lrd / lrd_of(qn);
}

}  // namespace

TEST(Registry, NamesAndCategories) {
  EXPECT_EQ(detector_names().size(), 8u);
  EXPECT_EQ(category_of("knn"), Category::US);
  EXPECT_EQ(category_of("ocsvm"), Category::US);
  EXPECT_EQ(category_of("xgbod"), Category::SS);
  EXPECT_EQ(category_of("svm"), Category::FS);
  EXPECT_EQ(category_of("xgb"), Category::FS);
  EXPECT_THROW(category_of("deepsvdd"), InvalidConfig);
}

TEST(Registry, DefaultGridSizes) {
  EXPECT_EQ(default_grid("knn").size(), 13u);
  EXPECT_EQ(default_grid("cblof").size(), 5u);
  EXPECT_EQ(default_grid("iforest").size(), 75u);
  EXPECT_EQ(default_grid("ocsvm").size(), 24u);
  EXPECT_EQ(default_grid("svm").size(), 54u);
  EXPECT_EQ(default_grid("xgb").size(), 1u);
  EXPECT_EQ(default_grid("xgbod").size(), 5u);
  // First key varies slowest.
  const auto g = default_grid("ocsvm");
  EXPECT_EQ(std::get<std::string>(g[0].at("kernel")), "sigmoid");
  EXPECT_EQ(std::get<double>(g[1].at("nu")), 0.5);
}

TEST(Registry, SuiteValidation) {
  auto suite = default_suite();
  EXPECT_NO_THROW(validate(suite));
  suite.push_back(default_spec("knn"));
  EXPECT_THROW(validate(suite), InvalidConfig);
  EXPECT_THROW(validate(std::vector<DetectorSpec>{}), InvalidConfig);
  DetectorSpec empty{"knn", Category::US, {}};
  EXPECT_THROW(validate(empty), InvalidConfig);
}

TEST(NeighborCount, FractionsRoundUp) {
  const Hyperparams one_percent{{"n_neighbors", 0.01}};
  EXPECT_EQ(hp::neighbor_count(one_percent, "n_neighbors", 2000, 5), 20u);
  EXPECT_EQ(hp::neighbor_count(one_percent, "n_neighbors", 1001, 5), 11u);
  EXPECT_EQ(hp::neighbor_count({{"n_neighbors", 0.001}}, "n_neighbors", 998, 5), 1u);
  EXPECT_EQ(hp::neighbor_count({{"n_neighbors", std::int64_t{7}}}, "n_neighbors", 10, 5), 7u);
  EXPECT_EQ(hp::neighbor_count({}, "n_neighbors", 10, 5), 5u);
  EXPECT_THROW(hp::neighbor_count({{"n_neighbors", 1.5}}, "n_neighbors", 10, 5), InvalidConfig);
}

TEST(Standardizer, RoundTrip) {
  const auto x = gaussian_points(50, 3, 1, 4.0);
  const auto s = Standardizer::fit(x);
  const auto back = s.inverse_transform(s.transform(x));
  for (std::size_t i = 0; i < x.data().size(); ++i) EXPECT_NEAR(back.data()[i], x.data()[i], 1e-9);
  const auto z = s.transform(x);
  for (std::size_t j = 0; j < 3; ++j) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < 50; ++i) m += z(i, j) / 50.0;
    for (std::size_t i = 0; i < 50; ++i) v += (z(i, j) - m) * (z(i, j) - m) / 50.0;
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v, 1.0, 1e-12);
  }
}

TEST(Standardizer, ConstantFeatureKeepsUnitScale) {
  Matrix x = Matrix::from_rows({{1.0, 5.0}, {2.0, 5.0}, {3.0, 5.0}});
  const auto s = Standardizer::fit(x);
  EXPECT_EQ(s.stds()[1], 1.0);
  EXPECT_EQ(s.transform(x)(0, 1), 0.0);
  EXPECT_THROW(s.transform(Matrix(1, 3)), ShapeError);
}

TEST(KdTree, MatchesBruteForce) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(400), d = 1 + rng.below(6);
    Matrix pts(n, d);
    // Coarse lattice values create many exact ties.
    for (auto& v : pts.data()) v = static_cast<double>(rng.below(5));
    const KdTree tree(pts, 1 + rng.below(20));
    for (int q = 0; q < 20; ++q) {
      std::vector<double> query(d);
      for (auto& v : query) v = rng.uniform(-1.0, 5.0);
      const std::size_t k = 1 + rng.below(n + 3);
      EXPECT_EQ(tree.knn(query, k), brute_force_knn(pts, query, k));
    }
  }
}

TEST(Knn, ScoreIsDistanceToKthNeighbour) {
  const auto x = gaussian_points(100, 2, 2);
  LabeledDataset train{x, std::vector<std::uint8_t>(100, 0), 0};
  const auto model = fit(spec_of("knn"), {{"n_neighbors", std::int64_t{5}}}, train);
  const auto z = model.standardizer().transform(x);
  const auto scores = model.score(x);
  for (std::size_t i = 0; i < 100; ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < 100; ++j) d.push_back(std::sqrt(squared_distance(z.row(i), z.row(j))));
    std::sort(d.begin(), d.end());
    // The query itself is one of the training points, at distance 0.
    EXPECT_NEAR(scores[i], d[4], 1e-12);
  }
}

TEST(Knn, FractionUsesWholeTrainingSet) {
  const auto train = labelled(gaussian_points(1980, 2, 3), gaussian_points(20, 2, 4, 3.0));
  const auto model = fit(spec_of("knn"), {{"n_neighbors", 0.01}}, train);
  EXPECT_EQ(dynamic_cast<const KnnModel&>(model.model()).k(), 20u);
}

TEST(Knn, PermutationInvariant) {
  const auto x = gaussian_points(200, 3, 5);
  std::vector<std::size_t> perm(200);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(6);
  shuffle(std::span<std::size_t>(perm), rng);
  const LabeledDataset a{x, std::vector<std::uint8_t>(200, 0), 0};
  const LabeledDataset b{x.select_rows(perm), std::vector<std::uint8_t>(200, 0), 0};
  const auto q = gaussian_points(50, 3, 7, 0.5);
  const auto sa = fit(spec_of("knn"), {{"n_neighbors", std::int64_t{7}}}, a).score(q);
  const auto sb = fit(spec_of("knn"), {{"n_neighbors", std::int64_t{7}}}, b).score(q);
  for (std::size_t i = 0; i < sa.size(); ++i) EXPECT_NEAR(sa[i], sb[i], 1e-12);
}

TEST(Knn, TooManyNeighboursIsFitError) {
  LabeledDataset train{gaussian_points(10, 2, 8), std::vector<std::uint8_t>(10, 0), 0};
  EXPECT_THROW(fit(spec_of("knn"), {{"n_neighbors", std::int64_t{11}}}, train), FitError);
  EXPECT_THROW(fit(spec_of("lof"), {{"n_neighbors", std::int64_t{10}}}, train), FitError);
  try {
    fit(spec_of("knn"), {{"n_neighbors", std::int64_t{11}}}, train);
  } catch (const FitError& e) {
    EXPECT_EQ(e.detector(), "knn");
    EXPECT_EQ(e.hyperparams(), "n_neighbors=11");
  }
}

TEST(Lof, UnitOnGridInterior) {
  Matrix grid;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) grid.append_row(std::vector<double>{double(i), double(j)});
  const LofModel lof(grid, 4);
  const auto scores = lof.score(grid);
  // Edge points have a k-distance of sqrt(2), which leaks one ring inward.
  for (int i = 3; i < 7; ++i)
    for (int j = 3; j < 7; ++j) EXPECT_NEAR(scores[static_cast<std::size_t>(10 * i + j)], 1.0, 1e-12);
}

TEST(Lof, MatchesBruteForceDefinition) {
  const auto train = gaussian_points(150, 2, 9);
  const LofModel lof(train, 6);
  const auto queries = gaussian_points(40, 2, 10, 0.3);
  const auto scores = lof.score(queries);
  for (std::size_t i = 0; i < queries.rows(); ++i)
    EXPECT_NEAR(scores[i], lof_oracle(train, queries.row(i), 6), 1e-9);
}

TEST(Lof, DuplicatePointsStayFinite) {
  Matrix x(30, 2, 1.0);
  const LofModel lof(x, 5);
  for (double s : lof.score(Matrix::from_rows({{1.0, 1.0}, {3.0, 3.0}}))) EXPECT_TRUE(std::isfinite(s));
}

TEST(IForest, PathLengthNormalizer) {
  const auto c = average_path_lengths(5000);
  EXPECT_EQ(c[2], 1.0);
  EXPECT_EQ(c[1], 0.0);
  for (std::size_t n = 3; n <= 5000; ++n) ASSERT_GT(c[n], c[n - 1]);
  // c(256) against the harmonic-number formula with the Euler constant.
  EXPECT_NEAR(c[256], 2.0 * (std::log(255.0) + 0.5772156649) - 2.0 * 255.0 / 256.0, 5e-3);
}

TEST(IForest, CentreScoresBelowFarPoint) {
  const auto x = gaussian_points(500, 2, 11);
  const IForestModel forest(x, {100, 0, 0.0, 3});
  const auto s = forest.score(Matrix::from_rows({{0.0, 0.0}, {30.0, 30.0}}));
  EXPECT_LT(s[0], s[1]);
  EXPECT_GT(s[1], 0.5);
}

TEST(IForest, SubsampleSize) {
  const auto x = gaussian_points(1000, 2, 12);
  EXPECT_EQ(IForestModel(x, {10, 0, 0.0, 0}).subsample_size(), 256u);
  EXPECT_EQ(IForestModel(x, {10, 0, 0.7, 0}).subsample_size(), 700u);
}

TEST(Ocsvm, OneDimensionalUniform) {
  Matrix x;
  Rng rng(13);
  for (int i = 0; i < 200; ++i) x.append_row(std::vector<double>{rng.uniform()});
  LabeledDataset train{x, std::vector<std::uint8_t>(200, 0), 0};
  const auto model = fit(spec_of("ocsvm"), {{"kernel", std::string("rbf")}, {"gamma", std::string("scale")}, {"nu", 0.5}}, train);
  const auto s = model.score(Matrix::from_rows({{2.0}, {0.5}}));
  EXPECT_GT(s[0], s[1]);
}

TEST(Cblof, LargeClusterSplit) {
  const std::vector<std::size_t> both{50, 40, 5, 5};
  EXPECT_EQ(cblof_large_count(both, 100, 0.9, 5.0), 2u);
  const std::vector<std::size_t> alpha_only{60, 10, 10, 10, 10};
  EXPECT_EQ(cblof_large_count(alpha_only, 100, 0.9, 5.0), 4u);
  const std::vector<std::size_t> beta_only{30, 30, 6, 6, 6, 6, 6, 5, 5};
  EXPECT_EQ(cblof_large_count(beta_only, 100, 0.99, 5.0), 2u);
  const std::vector<std::size_t> balanced{25, 25, 25, 25};
  EXPECT_THROW(cblof_large_count(balanced, 100, 0.9, 5.0), FitFailure);
}

TEST(Cblof, ScoresDistanceToLargeCentres) {
  const auto x = gaussian_points(300, 2, 14);
  const CblofModel model(x, {10, 0.9, 5.0, 1});
  const auto& centres = model.large_centers();
  ASSERT_GT(centres.rows(), 0u);
  const auto q = gaussian_points(20, 2, 15, 1.0);
  const auto s = model.score(q);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    double best = 1e300;
    for (std::size_t c = 0; c < centres.rows(); ++c) best = std::min(best, squared_distance(q.row(i), centres.row(c)));
    EXPECT_NEAR(s[i], std::sqrt(best), 1e-12);
  }
}

TEST(KMeans, RecoversSeparatedBlobs) {
  Matrix x;
  Rng rng(16);
  const double centres[3][2] = {{0, 0}, {20, 0}, {0, 20}};
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 50; ++i)
      x.append_row(std::vector<double>{centres[c][0] + rng.normal(), centres[c][1] + rng.normal()});
  const auto r = kmeans(x, {3, 5, 300, 1e-4, 7});
  for (int c = 0; c < 3; ++c) {
    const auto first = r.labels[static_cast<std::size_t>(50 * c)];
    for (int i = 0; i < 50; ++i) EXPECT_EQ(r.labels[static_cast<std::size_t>(50 * c + i)], first);
  }
  const auto again = kmeans(x, {3, 5, 300, 1e-4, 7});
  EXPECT_EQ(r.centers, again.centers);
  EXPECT_THROW(kmeans(x, {200, 1, 300, 1e-4, 0}), FitFailure);
}

class EveryDetector : public ::testing::TestWithParam<std::string> {};

TEST_P(EveryDetector, OrientationAtTenSigma) {
  const auto name = GetParam();
  const auto train = labelled(gaussian_points(300, 2, 20), gaussian_points(30, 2, 21, 10.0));
  const auto test = labelled(gaussian_points(200, 2, 22), gaussian_points(200, 2, 23, 10.0));
  const auto model = fit(spec_of(name), quick_hp(name), train);
  const auto s = model.score(test.points);
  ScoreSet set;
  for (std::size_t i = 0; i < s.size(); ++i) (test.labels[i] ? set.faulty_scores : set.healthy_scores).push_back(s[i]);
  EXPECT_GT(aucroc(set), 0.9);
}

TEST_P(EveryDetector, DeterministicFitAndScore) {
  const auto name = GetParam();
  const auto train = labelled(gaussian_points(200, 3, 24), gaussian_points(20, 3, 25, 2.0));
  const auto q = gaussian_points(30, 3, 26, 1.0);
  const auto a = fit(spec_of(name), quick_hp(name), train);
  const auto b = fit(spec_of(name), quick_hp(name), train);
  const auto sa = a.score(q);
  EXPECT_EQ(sa, b.score(q));
  EXPECT_EQ(sa, a.score(q));
  for (double v : sa) EXPECT_TRUE(std::isfinite(v));
}

TEST_P(EveryDetector, EmptyInputAndShapeError) {
  const auto name = GetParam();
  const auto train = labelled(gaussian_points(100, 2, 27), gaussian_points(10, 2, 28, 3.0));
  const auto model = fit(spec_of(name), quick_hp(name), train);
  EXPECT_TRUE(model.score(Matrix(0, 2)).empty());
  EXPECT_THROW(model.score(Matrix(3, 4)), ShapeError);
}

INSTANTIATE_TEST_SUITE_P(All, EveryDetector,
                         ::testing::Values("knn", "lof", "cblof", "iforest", "ocsvm", "svm", "xgb", "xgbod"));

TEST(Fit, UnsupervisedIgnoresFaultyRows) {
  const auto healthy = gaussian_points(100, 2, 30);
  const auto with_faulty = labelled(healthy, gaussian_points(10, 2, 31, 5.0));
  const auto model = fit(spec_of("knn"), {{"n_neighbors", std::int64_t{3}}}, with_faulty);
  // The scaler still sees every row; the neighbour index only the healthy ones.
  const auto z = model.standardizer().transform(healthy);
  const KnnModel oracle(z, 3);
  const auto q = gaussian_points(10, 2, 32, 4.0);
  EXPECT_EQ(model.score(q), oracle.score(model.standardizer().transform(q)));
}

TEST(Fit, SupervisedNeedsBothClasses) {
  LabeledDataset only_healthy{gaussian_points(50, 2, 33), std::vector<std::uint8_t>(50, 0), 0};
  EXPECT_THROW(fit(spec_of("svm"), quick_hp("svm"), only_healthy), FitError);
  EXPECT_THROW(fit(spec_of("xgbod"), quick_hp("xgbod"), only_healthy), FitError);
  EXPECT_THROW(fit(spec_of("knn"), quick_hp("knn"), LabeledDataset{}), FitError);
}

TEST(Xgbod, BankMembersAreRecorded) {
  const auto train = labelled(gaussian_points(200, 2, 34), gaussian_points(20, 2, 35, 2.0));
  const auto model = fit(spec_of("xgbod"), {{"random_state", std::int64_t{2}}}, train);
  const auto& members = dynamic_cast<const XgbodModel&>(model.model()).members();
  EXPECT_GE(members.size(), 7u);
  EXPECT_LE(members.size(), xgbod_bank(2).size());
}
