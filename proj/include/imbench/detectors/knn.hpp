#pragma once

#include <cmath>
#include <memory>

#include "imbench/detectors/kdtree.hpp"
#include "imbench/detectors/model.hpp"

namespace imbench {

/// Score = distance to the k-th nearest training point.
class KnnModel final : public Model {
 public:
  KnnModel(Matrix train, std::size_t k) : train_(std::move(train)), tree_(train_), k_(k) {
    if (k_ < 1) throw FitFailure("n_neighbors must be >= 1");
    if (k_ > train_.rows())
      throw FitFailure("n_neighbors=" + std::to_string(k_) + " exceeds " +
                       std::to_string(train_.rows()) + " training points");
  }

  KnnModel(const KnnModel&) = delete;
  KnnModel& operator=(const KnnModel&) = delete;

  std::size_t k() const noexcept { return k_; }

  std::vector<double> score(const Matrix& x) const override {
    std::vector<double> out(x.rows());
    std::vector<Neighbor> nb;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      tree_.knn(x.row(i), k_, nb);
      out[i] = std::sqrt(nb.back().dist2);
    }
    return out;
  }

 private:
  Matrix train_;
  KdTree tree_;
  std::size_t k_;
};

inline std::unique_ptr<Model> fit_knn(const Hyperparams& p, const FitInput& in) {
  const std::size_t k = hp::neighbor_count(p, "n_neighbors", in.n_total, 5);
  return std::make_unique<KnnModel>(in.x, k);
}

}  // namespace imbench
