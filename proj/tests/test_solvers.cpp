#include <gtest/gtest.h>

#include <cmath>

#include "imbench/detectors/gbdt.hpp"
#include "imbench/detectors/svm.hpp"
#include "imbench/random.hpp"

using namespace imbench;

namespace {

struct Problem {
  Matrix x;
  std::vector<std::uint8_t> labels;
};

Problem random_problem(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 20 + rng.below(100), d = 1 + rng.below(5);
  const double sep = rng.uniform(0.0, 3.0);
  Problem p{Matrix(n, d), std::vector<std::uint8_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    p.labels[i] = (i % 4 == 0) ? 1 : 0;
    for (std::size_t j = 0; j < d; ++j) p.x(i, j) = rng.normal() + (p.labels[i] ? sep : 0.0);
  }
  return p;
}

Kernel random_kernel(Rng& rng, std::size_t d) {
  Kernel k;
  const auto t = rng.below(3);
  k.type = t == 0 ? KernelType::Linear : (t == 1 ? KernelType::Rbf : KernelType::Sigmoid);
  k.gamma = rng.uniform(0.2, 2.0) / static_cast<double>(d);
  return k;
}

// Maximal KKT violation of min 1/2 a'Qa + p'a s.t. y'a = const, 0 <= a <= C,
// recomputed from scratch: max over I_up of -y g minus min over I_low of -y g.
double kkt_gap(const Matrix& x, const std::vector<std::int8_t>& y, const Kernel& k, const std::vector<double>& upper,
               const std::vector<double>& p, const std::vector<double>& a) {
  const std::size_t l = a.size();
  double m = -1e300, big_m = 1e300;
  for (std::size_t i = 0; i < l; ++i) {
    double g = p[i];
    for (std::size_t j = 0; j < l; ++j) g += y[i] * y[j] * k(x.row(i), x.row(j)) * a[j];
    const double v = -y[i] * g;
    const bool up = (y[i] > 0 && a[i] < upper[i]) || (y[i] < 0 && a[i] > 0.0);
    const bool low = (y[i] > 0 && a[i] > 0.0) || (y[i] < 0 && a[i] < upper[i]);
    if (up) m = std::max(m, v);
    if (low) big_m = std::min(big_m, v);
  }
  return m - big_m;
}

}  // namespace

TEST(Svc, DualFeasibilityAndKkt) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto p = random_problem(seed);
    Rng rng(seed + 1000);
    SvcOptions opt;
    opt.kernel = random_kernel(rng, p.x.cols());
    opt.c = rng.uniform(0.1, 2.0);
    const SvcModel model(p.x, p.labels, opt);
    const auto& a = model.solution().alpha;
    double balance = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_GE(a[i], 0.0);
      EXPECT_LE(a[i], model.upper_bounds()[i]);
      balance += a[i] * model.signs()[i];
    }
    EXPECT_LE(std::abs(balance), 1e-6) << seed;
    const std::vector<double> minus_one(a.size(), -1.0);
    EXPECT_LE(kkt_gap(p.x, model.signs(), opt.kernel, model.upper_bounds(), minus_one, a), 1e-3 + 1e-9) << seed;
  }
}

TEST(Svc, BalancedClassWeights) {
  const auto p = random_problem(5);
  SvcOptions opt;
  opt.c = 1.0;
  const SvcModel model(p.x, p.labels, opt);
  const double n = static_cast<double>(p.labels.size());
  double n_pos = 0.0;
  for (auto v : p.labels) n_pos += v;
  for (std::size_t i = 0; i < p.labels.size(); ++i)
    EXPECT_DOUBLE_EQ(model.upper_bounds()[i], p.labels[i] ? n / (2.0 * n_pos) : n / (2.0 * (n - n_pos)));
}

TEST(Svc, SeparatesEasyClasses) {
  const Matrix x = Matrix::from_rows({{-2.0}, {-1.5}, {-1.0}, {1.0}, {1.5}, {2.0}});
  const std::vector<std::uint8_t> y{0, 0, 0, 1, 1, 1};
  SvcOptions opt;
  opt.kernel.type = KernelType::Linear;
  const SvcModel model(x, y, opt);
  const auto s = model.score(x);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(s[i] > 0.0, y[i] == 1);
}

TEST(Svc, OneClassIsFitFailure) {
  const Matrix x(5, 1, 0.0);
  EXPECT_THROW(SvcModel(x, std::vector<std::uint8_t>(5, 0), SvcOptions{}), FitFailure);
}

TEST(Ocsvm, DualFeasibilityAndKkt) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto p = random_problem(seed + 500);
    Rng rng(seed + 2000);
    OcsvmOptions opt;
    opt.kernel = random_kernel(rng, p.x.cols());
    opt.nu = rng.uniform(0.1, 0.9);
    const OcsvmModel model(p.x, opt);
    const auto& a = model.solution().alpha;
    double total = 0.0;
    for (double v : a) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      total += v;
    }
    EXPECT_NEAR(total, opt.nu * static_cast<double>(a.size()), 1e-6) << seed;
    const std::vector<std::int8_t> ones(a.size(), 1);
    EXPECT_LE(kkt_gap(p.x, ones, opt.kernel, std::vector<double>(a.size(), 1.0), std::vector<double>(a.size(), 0.0), a),
              1e-3 + 1e-9)
        << seed;
  }
}

TEST(Ocsvm, ObjectiveMatchesQuadraticForm) {
  const auto p = random_problem(77);
  OcsvmOptions opt;
  opt.kernel.gamma = 0.5;
  const OcsvmModel model(p.x, opt);
  const auto& a = model.solution().alpha;
  double obj = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) obj += 0.5 * a[i] * a[j] * opt.kernel(p.x.row(i), p.x.row(j));
  EXPECT_NEAR(model.solution().objective, obj, 1e-8 * std::max(1.0, std::abs(obj)));
}

TEST(Ocsvm, RejectsBadNu) {
  const Matrix x(5, 1, 0.0);
  OcsvmOptions opt;
  opt.nu = 0.0;
  EXPECT_THROW(OcsvmModel(x, opt), FitFailure);
}

TEST(Gamma, AutoAndScale) {
  const Matrix x = Matrix::from_rows({{0.0, 2.0}, {2.0, 0.0}});
  EXPECT_DOUBLE_EQ(resolve_gamma(std::string("auto"), x), 0.5);
  // All four entries {0, 2, 2, 0}: variance 1, so scale = 1 / (2 * 1).
  EXPECT_DOUBLE_EQ(resolve_gamma(std::string("scale"), x), 0.5);
  EXPECT_DOUBLE_EQ(resolve_gamma(0.25, x), 0.25);
  EXPECT_THROW(resolve_gamma(std::string("bogus"), x), InvalidConfig);
}

TEST(Gbdt, TrainingLossNonincreasing) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto p = random_problem(seed + 3000);
    GbdtOptions opt;
    opt.rounds = 30;
    const GbdtModel model(p.x, p.labels, opt);
    const auto& h = model.loss_history();
    ASSERT_EQ(h.size(), 31u);
    EXPECT_NEAR(h.front(), std::log(2.0), 1e-12);
    for (std::size_t r = 1; r < h.size(); ++r) EXPECT_LE(h[r], h[r - 1] + 1e-12) << seed << " round " << r;
  }
}

TEST(Gbdt, LogisticLossMatchesDefinition) {
  const std::vector<double> m{-3.0, 0.0, 2.0, 800.0};
  const std::vector<std::uint8_t> y{0, 1, 1, 0};
  const double want = (std::log1p(std::exp(-3.0)) + std::log(2.0) + std::log1p(std::exp(-2.0)) + 800.0) / 4.0;
  EXPECT_NEAR(logistic_loss(m, y), want, 1e-12);
}

TEST(Gbdt, ScoresAreLogOdds) {
  // Ten per class so each child clears min_child_weight (hessian 0.25 per row at the start).
  Matrix x;
  std::vector<std::uint8_t> y;
  for (int i = 0; i < 20; ++i) {
    x.append_row(std::vector<double>{i < 10 ? 0.1 * i : 5.0 + 0.1 * i});
    y.push_back(i < 10 ? 0 : 1);
  }
  GbdtOptions opt;
  opt.rounds = 20;
  const GbdtModel model(x, y, opt);
  const auto s = model.score(x);
  EXPECT_LT(s[0], 0.0);
  EXPECT_GT(s[19], 0.0);
  EXPECT_EQ(s[0], s[1]);
  // A single-leaf model of the full data reproduces the prior log-odds of 0.
  GbdtOptions stump = opt;
  stump.max_depth = 0;
  EXPECT_NEAR(GbdtModel(x, y, stump).score(x)[0], 0.0, 1e-12);
}
