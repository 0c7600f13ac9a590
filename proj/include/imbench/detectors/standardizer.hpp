#pragma once

#include <cmath>
#include <vector>

#include "imbench/core.hpp"

namespace imbench {

/// Per-feature zero-mean / unit-variance scaling (population variance).
/// Features with (near) zero spread keep a scale of 1.
class Standardizer {
 public:
  static constexpr double kMinStd = 1e-12;

  Standardizer() = default;

  static Standardizer fit(const Matrix& x) {
    if (x.rows() == 0) throw EmptySample("Standardizer::fit: no rows");
    Standardizer s;
    const std::size_t d = x.cols();
    s.means_.assign(d, 0.0);
    s.stds_.assign(d, 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) s.means_[j] += x(i, j);
    for (auto& m : s.means_) m /= static_cast<double>(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double t = x(i, j) - s.means_[j];
        s.stds_[j] += t * t;
      }
    for (auto& v : s.stds_) {
      v = std::sqrt(v / static_cast<double>(x.rows()));
      if (!(v > kMinStd)) v = 1.0;
    }
    return s;
  }

  std::size_t dim() const noexcept { return means_.size(); }
  const std::vector<double>& means() const noexcept { return means_; }
  const std::vector<double>& stds() const noexcept { return stds_; }

  Matrix transform(const Matrix& x) const {
    check(x);
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - means_[j]) / stds_[j];
    return out;
  }

  Matrix inverse_transform(const Matrix& z) const {
    check(z);
    Matrix out(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < z.cols(); ++j) out(i, j) = z(i, j) * stds_[j] + means_[j];
    return out;
  }

 private:
  void check(const Matrix& x) const {
    if (x.cols() != dim())
      throw ShapeError("Standardizer: expected " + std::to_string(dim()) + " features, got " +
                       std::to_string(x.cols()));
  }

  std::vector<double> means_;
  std::vector<double> stds_;
};

}  // namespace imbench
