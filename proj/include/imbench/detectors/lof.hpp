#pragma once

// Local outlier factor in novelty mode: training-point k-distances and local
// reachability densities are computed with each point's own entry excluded;
// new points are compared against the k nearest training points.

#include <algorithm>
#include <memory>

#include "imbench/detectors/kdtree.hpp"
#include "imbench/detectors/model.hpp"

namespace imbench {

class LofModel final : public Model {
 public:
  /// Reachability distances are floored here before averaging.
  static constexpr double kMinDistance = 1e-12;

  LofModel(Matrix train, std::size_t k) : train_(std::move(train)), tree_(train_), k_(k) {
    const std::size_t n = train_.rows();
    if (k_ < 1) throw FitFailure("n_neighbors must be >= 1");
    if (k_ + 1 > n)
      throw FitFailure("n_neighbors=" + std::to_string(k_) + " needs more than " +
                       std::to_string(n) + " training points");

    neighbors_.resize(n * k_);
    kdist_.resize(n);
    std::vector<Neighbor> nb;
    for (std::size_t i = 0; i < n; ++i) {
      tree_.knn(train_.row(i), k_ + 1, nb);
      auto self = std::find_if(nb.begin(), nb.end(), [&](const Neighbor& x) { return x.index == i; });
      if (self != nb.end()) nb.erase(self);
      nb.resize(k_);
      for (std::size_t j = 0; j < k_; ++j) neighbors_[i * k_ + j] = nb[j];
      kdist_[i] = std::sqrt(nb.back().dist2);
    }
    lrd_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < k_; ++j) {
        const Neighbor& o = neighbors_[i * k_ + j];
        sum += std::max(kdist_[o.index], std::sqrt(o.dist2));
      }
      lrd_[i] = 1.0 / std::max(sum / static_cast<double>(k_), kMinDistance);
    }
  }

  LofModel(const LofModel&) = delete;
  LofModel& operator=(const LofModel&) = delete;

  std::vector<double> score(const Matrix& x) const override {
    std::vector<double> out(x.rows());
    std::vector<Neighbor> nb;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      tree_.knn(x.row(i), k_, nb);
      double reach = 0.0, density = 0.0;
      for (const auto& o : nb) {
        reach += std::max(kdist_[o.index], std::sqrt(o.dist2));
        density += lrd_[o.index];
      }
      const double lrd = 1.0 / std::max(reach / static_cast<double>(k_), kMinDistance);
      out[i] = (density / static_cast<double>(k_)) / lrd;
    }
    return out;
  }

  const std::vector<double>& training_lrd() const noexcept { return lrd_; }

 private:
  Matrix train_;
  KdTree tree_;
  std::size_t k_;
  std::vector<Neighbor> neighbors_;
  std::vector<double> kdist_;
  std::vector<double> lrd_;
};

inline std::unique_ptr<Model> fit_lof(const Hyperparams& p, const FitInput& in) {
  const std::size_t k = hp::neighbor_count(p, "n_neighbors", in.n_total, 20);
  return std::make_unique<LofModel>(in.x, k);
}

}  // namespace imbench
