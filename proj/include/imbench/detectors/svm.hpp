#pragma once

// Kernel machines: a pairwise working-set (SMO) dual solver and the two
// detectors built on it, the one-class nu-SVM and the class-weighted C-SVM.
//
// The solver handles the generic dual
//     min_a 1/2 a^T Q a + p^T a   s.t.  y^T a = const,  0 <= a_i <= C_i
// with Q_ij = y_i y_j K(x_i, x_j). Working pairs are selected with
// second-order information (maximal violating i, then j minimising the
// predicted objective); iteration stops when the maximal KKT violation drops
// below eps. Non-PSD kernels (sigmoid) are handled by clamping the pair
// curvature at tau.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "imbench/detectors/model.hpp"

namespace imbench {

enum class KernelType { Linear, Rbf, Sigmoid };

inline KernelType parse_kernel(const std::string& name) {
  if (name == "linear") return KernelType::Linear;
  if (name == "rbf") return KernelType::Rbf;
  if (name == "sigmoid") return KernelType::Sigmoid;
  throw InvalidConfig("unknown kernel '" + name + "'");
}

struct Kernel {
  KernelType type = KernelType::Rbf;
  double gamma = 1.0;
  double coef0 = 0.0;

  double operator()(std::span<const double> a, std::span<const double> b) const noexcept {
    switch (type) {
      case KernelType::Linear: return dot(a, b);
      case KernelType::Rbf: return std::exp(-gamma * squared_distance(a, b));
      case KernelType::Sigmoid: return std::tanh(gamma * dot(a, b) + coef0);
    }
    return 0.0;
  }
};

/// "auto" = 1/d; "scale" = 1/(d * variance of all entries of x); numeric as given.
inline double resolve_gamma(const HpValue& value, const Matrix& x) {
  const double d = static_cast<double>(x.cols());
  if (auto* s = std::get_if<std::string>(&value)) {
    if (*s == "auto") return 1.0 / d;
    if (*s == "scale") {
      const auto data = x.data();
      double mean = 0.0;
      for (double v : data) mean += v;
      mean /= static_cast<double>(data.size());
      double var = 0.0;
      for (double v : data) var += (v - mean) * (v - mean);
      var /= static_cast<double>(data.size());
      return var > 0.0 ? 1.0 / (d * var) : 1.0;
    }
    throw InvalidConfig("unknown gamma '" + *s + "'");
  }
  if (auto* g = std::get_if<double>(&value)) return *g;
  return static_cast<double>(std::get<std::int64_t>(value));
}

struct QpSolution {
  std::vector<double> alpha;
  double rho = 0.0;
  double objective = 0.0;
  std::size_t iterations = 0;
};

struct SmoOptions {
  double eps = 1e-3;
  std::size_t max_iter = 0;  // 0 selects max(100000, 100 l)
  // Problems up to this size precompute the full Q matrix; larger ones
  // recompute the two needed rows every iteration.
  std::size_t dense_limit = 3000;
};

class SmoSolver {
 public:
  static constexpr double kTau = 1e-12;

  SmoSolver(const Matrix& x, std::vector<std::int8_t> y, Kernel kernel, std::vector<double> upper,
            std::vector<double> p, SmoOptions opt = {})
      : x_(x), y_(std::move(y)), kernel_(kernel), upper_(std::move(upper)), p_(std::move(p)), opt_(opt) {
    l_ = x_.rows();
    if (y_.size() != l_ || upper_.size() != l_ || p_.size() != l_)
      throw ShapeError("SmoSolver: inconsistent problem sizes");
    diag_.resize(l_);
    for (std::size_t i = 0; i < l_; ++i) diag_[i] = kernel_(x_.row(i), x_.row(i));
    if (l_ <= opt_.dense_limit) {
      dense_.resize(l_ * l_);
      for (std::size_t i = 0; i < l_; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
          const double q = y_[i] * y_[j] * kernel_(x_.row(i), x_.row(j));
          dense_[i * l_ + j] = q;
          dense_[j * l_ + i] = q;
        }
    }
  }

  QpSolution solve(std::vector<double> alpha) {
    if (alpha.size() != l_) throw ShapeError("SmoSolver: initial alpha has wrong size");
    const std::size_t max_iter = opt_.max_iter ? opt_.max_iter : std::max<std::size_t>(100000, 100 * l_);
    std::vector<double> grad(p_);
    std::vector<double> row_i(l_), row_j(l_);
    for (std::size_t i = 0; i < l_; ++i) {
      if (alpha[i] == 0.0) continue;
      const double* qi = row(i, row_i);
      for (std::size_t k = 0; k < l_; ++k) grad[k] += alpha[i] * qi[k];
    }

    QpSolution sol;
    std::size_t iter = 0;
    for (;; ++iter) {
      std::size_t i = 0, j = 0;
      if (select_working_set(alpha, grad, row_i, i, j)) break;
      if (iter >= max_iter) throw FitFailure("SMO solver did not converge");
      const double* qi = row(i, row_i);
      const double* qj = row(j, row_j);
      const double ci = upper_[i], cj = upper_[j];
      const double old_i = alpha[i], old_j = alpha[j];

      if (y_[i] != y_[j]) {
        double quad = diag_[i] + diag_[j] + 2.0 * qi[j];
        if (quad <= 0.0) quad = kTau;
        const double delta = (-grad[i] - grad[j]) / quad;
        const double diff = alpha[i] - alpha[j];
        alpha[i] += delta;
        alpha[j] += delta;
        if (diff > 0.0) {
          if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = diff; }
        } else {
          if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = -diff; }
        }
        if (diff > ci - cj) {
          if (alpha[i] > ci) { alpha[i] = ci; alpha[j] = ci - diff; }
        } else {
          if (alpha[j] > cj) { alpha[j] = cj; alpha[i] = cj + diff; }
        }
      } else {
        double quad = diag_[i] + diag_[j] - 2.0 * qi[j];
        if (quad <= 0.0) quad = kTau;
        const double delta = (grad[i] - grad[j]) / quad;
        const double sum = alpha[i] + alpha[j];
        alpha[i] -= delta;
        alpha[j] += delta;
        if (sum > ci) {
          if (alpha[i] > ci) { alpha[i] = ci; alpha[j] = sum - ci; }
        } else {
          if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = sum; }
        }
        if (sum > cj) {
          if (alpha[j] > cj) { alpha[j] = cj; alpha[i] = sum - cj; }
        } else {
          if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = sum; }
        }
      }
      const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
      for (std::size_t k = 0; k < l_; ++k) grad[k] += qi[k] * di + qj[k] * dj;
    }

    sol.iterations = iter;
    sol.rho = compute_rho(alpha, grad);
    double obj = 0.0;
    for (std::size_t i = 0; i < l_; ++i) obj += alpha[i] * (grad[i] + p_[i]);
    sol.objective = obj / 2.0;
    sol.alpha = std::move(alpha);
    return sol;
  }

 private:
  const double* row(std::size_t i, std::vector<double>& buffer) const {
    if (!dense_.empty()) return dense_.data() + i * l_;
    for (std::size_t k = 0; k < l_; ++k) buffer[k] = y_[i] * y_[k] * kernel_(x_.row(i), x_.row(k));
    return buffer.data();
  }

  bool at_upper(const std::vector<double>& a, std::size_t i) const { return a[i] >= upper_[i]; }
  bool at_lower(const std::vector<double>& a, std::size_t i) const { return a[i] <= 0.0; }

  // Returns true when the KKT conditions hold within eps.
  bool select_working_set(const std::vector<double>& a, const std::vector<double>& grad,
                          std::vector<double>& buffer, std::size_t& out_i, std::size_t& out_j) const {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::int64_t gmax_idx = -1, gmin_idx = -1;
    double obj_diff_min = std::numeric_limits<double>::infinity();

    for (std::size_t t = 0; t < l_; ++t) {
      if (y_[t] == 1) {
        if (!at_upper(a, t) && -grad[t] >= gmax) { gmax = -grad[t]; gmax_idx = static_cast<std::int64_t>(t); }
      } else {
        if (!at_lower(a, t) && grad[t] >= gmax) { gmax = grad[t]; gmax_idx = static_cast<std::int64_t>(t); }
      }
    }
    if (gmax_idx < 0) return true;
    const auto i = static_cast<std::size_t>(gmax_idx);
    const double* qi = row(i, buffer);

    for (std::size_t j = 0; j < l_; ++j) {
      if (y_[j] == 1) {
        if (at_lower(a, j)) continue;
        const double grad_diff = gmax + grad[j];
        gmax2 = std::max(gmax2, grad[j]);
        if (grad_diff > 0.0) {
          double quad = diag_[i] + diag_[j] - 2.0 * y_[i] * qi[j];
          if (quad <= 0.0) quad = kTau;
          const double obj_diff = -(grad_diff * grad_diff) / quad;
          if (obj_diff <= obj_diff_min) { gmin_idx = static_cast<std::int64_t>(j); obj_diff_min = obj_diff; }
        }
      } else {
        if (at_upper(a, j)) continue;
        const double grad_diff = gmax - grad[j];
        gmax2 = std::max(gmax2, -grad[j]);
        if (grad_diff > 0.0) {
          double quad = diag_[i] + diag_[j] + 2.0 * y_[i] * qi[j];
          if (quad <= 0.0) quad = kTau;
          const double obj_diff = -(grad_diff * grad_diff) / quad;
          if (obj_diff <= obj_diff_min) { gmin_idx = static_cast<std::int64_t>(j); obj_diff_min = obj_diff; }
        }
      }
    }
    if (gmax + gmax2 < opt_.eps || gmin_idx < 0) return true;
    out_i = i;
    out_j = static_cast<std::size_t>(gmin_idx);
    return false;
  }

  double compute_rho(const std::vector<double>& a, const std::vector<double>& grad) const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t i = 0; i < l_; ++i) {
      const double yg = y_[i] * grad[i];
      if (at_upper(a, i)) {
        if (y_[i] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else if (at_lower(a, i)) {
        if (y_[i] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    return n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  }

  const Matrix& x_;
  std::vector<std::int8_t> y_;
  Kernel kernel_;
  std::vector<double> upper_;
  std::vector<double> p_;
  SmoOptions opt_;
  std::size_t l_ = 0;
  std::vector<double> diag_;
  std::vector<double> dense_;
};

/// Kernel expansion f(x) = sum_i coef_i K(sv_i, x) - rho over support vectors.
class KernelExpansion {
 public:
  KernelExpansion() = default;
  KernelExpansion(const Matrix& x, std::span<const double> coef, double rho, Kernel kernel)
      : kernel_(kernel), rho_(rho) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (coef[i] == 0.0) continue;
      support_.append_row(x.row(i));
      coef_.push_back(coef[i]);
    }
  }

  double decision(std::span<const double> p) const {
    double s = 0.0;
    for (std::size_t i = 0; i < coef_.size(); ++i) s += coef_[i] * kernel_(support_.row(i), p);
    return s - rho_;
  }

  std::size_t support_size() const noexcept { return coef_.size(); }

 private:
  Matrix support_;
  std::vector<double> coef_;
  Kernel kernel_;
  double rho_ = 0.0;
};

struct OcsvmOptions {
  Kernel kernel;
  double nu = 0.5;
  SmoOptions smo;
};

/// One-class nu-SVM, dual scaled so that 0 <= a_i <= 1 and sum a_i = nu l.
/// Score = -f(x): points outside the estimated support score higher.
class OcsvmModel final : public Model {
 public:
  OcsvmModel(const Matrix& x, const OcsvmOptions& opt) {
    const std::size_t l = x.rows();
    if (l < 1) throw FitFailure("OCSVM: no training points");
    if (!(opt.nu > 0.0 && opt.nu <= 1.0)) throw FitFailure("OCSVM: nu must lie in (0, 1]");
    std::vector<double> alpha(l, 0.0);
    const double total = opt.nu * static_cast<double>(l);
    const auto whole = static_cast<std::size_t>(total);
    for (std::size_t i = 0; i < whole; ++i) alpha[i] = 1.0;
    if (whole < l) alpha[whole] = total - static_cast<double>(whole);
    SmoSolver solver(x, std::vector<std::int8_t>(l, 1), opt.kernel, std::vector<double>(l, 1.0),
                     std::vector<double>(l, 0.0), opt.smo);
    solution_ = solver.solve(std::move(alpha));
    expansion_ = KernelExpansion(x, solution_.alpha, solution_.rho, opt.kernel);
  }

  const QpSolution& solution() const noexcept { return solution_; }

  std::vector<double> score(const Matrix& x) const override {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = -expansion_.decision(x.row(i));
    return out;
  }

 private:
  QpSolution solution_;
  KernelExpansion expansion_;
};

struct SvcOptions {
  Kernel kernel;
  double c = 1.0;
  bool balanced = true;
  SmoOptions smo;
};

/// Soft-margin C-SVM with faulty = +1. With balanced weights each class gets
/// C * n / (2 n_class). Score = f(x), positive on the faulty side.
class SvcModel final : public Model {
 public:
  SvcModel(const Matrix& x, std::span<const std::uint8_t> labels, const SvcOptions& opt) {
    const std::size_t l = x.rows();
    std::size_t n_pos = 0;
    for (auto v : labels) n_pos += v ? 1 : 0;
    const std::size_t n_neg = l - n_pos;
    if (n_pos == 0 || n_neg == 0) throw FitFailure("SVM: both classes are required");
    if (!(opt.c > 0.0)) throw FitFailure("SVM: C must be > 0");
    const double w_pos = opt.balanced ? static_cast<double>(l) / (2.0 * static_cast<double>(n_pos)) : 1.0;
    const double w_neg = opt.balanced ? static_cast<double>(l) / (2.0 * static_cast<double>(n_neg)) : 1.0;
    std::vector<std::int8_t> y(l);
    std::vector<double> upper(l);
    for (std::size_t i = 0; i < l; ++i) {
      y[i] = labels[i] ? 1 : -1;
      upper[i] = opt.c * (labels[i] ? w_pos : w_neg);
    }
    upper_ = upper;
    y_ = y;
    SmoSolver solver(x, y, opt.kernel, std::move(upper), std::vector<double>(l, -1.0), opt.smo);
    solution_ = solver.solve(std::vector<double>(l, 0.0));
    std::vector<double> coef(l);
    for (std::size_t i = 0; i < l; ++i) coef[i] = solution_.alpha[i] * y[i];
    expansion_ = KernelExpansion(x, coef, solution_.rho, opt.kernel);
  }

  const QpSolution& solution() const noexcept { return solution_; }
  const std::vector<double>& upper_bounds() const noexcept { return upper_; }
  const std::vector<std::int8_t>& signs() const noexcept { return y_; }

  std::vector<double> score(const Matrix& x) const override {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = expansion_.decision(x.row(i));
    return out;
  }

 private:
  QpSolution solution_;
  KernelExpansion expansion_;
  std::vector<double> upper_;
  std::vector<std::int8_t> y_;
};

inline Kernel kernel_from(const Hyperparams& p, const Matrix& x) {
  Kernel k;
  k.type = parse_kernel(hp::text(p, "kernel", "rbf"));
  auto it = p.find("gamma");
  k.gamma = resolve_gamma(it == p.end() ? HpValue{std::string("scale")} : it->second, x);
  k.coef0 = hp::number(p, "coef0", 0.0);
  return k;
}

inline std::unique_ptr<Model> fit_ocsvm(const Hyperparams& p, const FitInput& in) {
  OcsvmOptions opt;
  opt.kernel = kernel_from(p, in.x);
  opt.nu = hp::number(p, "nu", 0.5);
  return std::make_unique<OcsvmModel>(in.x, opt);
}

inline std::unique_ptr<Model> fit_svm(const Hyperparams& p, const FitInput& in) {
  SvcOptions opt;
  opt.kernel = kernel_from(p, in.x);
  opt.c = hp::number(p, "c", 1.0);
  opt.balanced = hp::text(p, "class_weight", "balanced") == "balanced";
  return std::make_unique<SvcModel>(in.x, in.labels, opt);
}

}  // namespace imbench
