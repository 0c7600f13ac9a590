#pragma once

// XGBOD-style stacking: a fixed bank of unsupervised detectors is fitted on
// the (standardized) training points, their scores are standardized and
// appended to the raw features, and a boosted-tree classifier is trained
// on the augmented representation.

#include <memory>
#include <string>
#include <vector>

#include "imbench/detectors/cblof.hpp"
#include "imbench/detectors/gbdt.hpp"
#include "imbench/detectors/iforest.hpp"
#include "imbench/detectors/knn.hpp"
#include "imbench/detectors/lof.hpp"
#include "imbench/detectors/standardizer.hpp"
#include "imbench/detectors/svm.hpp"

namespace imbench {

struct BankMember {
  std::string name;
  Hyperparams hp;
};

/// Version 1 of the base-detector bank.
inline std::vector<BankMember> xgbod_bank(std::int64_t random_state) {
  std::vector<BankMember> bank;
  for (const char* name : {"knn", "lof"}) {
    bank.push_back({name, {{"n_neighbors", std::int64_t{3}}}});
    bank.push_back({name, {{"n_neighbors", 0.01}}});
    bank.push_back({name, {{"n_neighbors", 0.05}}});
  }
  bank.push_back({"iforest", {{"n_estimators", std::int64_t{100}}, {"random_state", random_state}}});
  bank.push_back({"cblof", {{"n_clusters", std::int64_t{8}}, {"random_state", random_state}}});
  bank.push_back({"ocsvm", {{"kernel", std::string("rbf")}, {"gamma", std::string("scale")}, {"nu", 0.5}}});
  return bank;
}

class XgbodModel final : public Model {
 public:
  XgbodModel(const Matrix& x, std::span<const std::uint8_t> labels, std::size_t n_total,
             std::int64_t random_state, const GbdtOptions& booster) {
    const FitInput in{x, labels, n_total};
    Matrix bank_scores(x.rows(), 0);
    for (auto& member : xgbod_bank(random_state)) {
      std::unique_ptr<Model> model;
      try {
        model = fit_member(member, in);
      } catch (const FitFailure&) {
        continue;  // members that cannot be fitted on this data are left out
      }
      std::vector<double> s = model->score(x);
      Matrix column(s.size(), 1);
      std::copy(s.begin(), s.end(), column.data().begin());
      bank_scores = Matrix::hstack(bank_scores, column);
      used_.push_back(member.name + "(" + to_string(member.hp) + ")");
      members_.push_back(std::move(model));
    }
    if (members_.empty()) throw FitFailure("XGBOD: no base detector could be fitted");
    score_scaler_ = Standardizer::fit(bank_scores);
    booster_ = std::make_unique<GbdtModel>(
        Matrix::hstack(x, score_scaler_.transform(bank_scores)), labels, booster);
  }

  /// Bank members that were fitted, as "name(hyperparameters)".
  const std::vector<std::string>& members() const noexcept { return used_; }

  std::vector<double> score(const Matrix& x) const override {
    Matrix bank_scores(x.rows(), members_.size());
    for (std::size_t m = 0; m < members_.size(); ++m) {
      const auto s = members_[m]->score(x);
      for (std::size_t i = 0; i < x.rows(); ++i) bank_scores(i, m) = s[i];
    }
    return booster_->score(Matrix::hstack(x, score_scaler_.transform(bank_scores)));
  }

 private:
  static std::unique_ptr<Model> fit_member(const BankMember& m, const FitInput& in) {
    if (m.name == "knn") return fit_knn(m.hp, in);
    if (m.name == "lof") return fit_lof(m.hp, in);
    if (m.name == "iforest") return fit_iforest(m.hp, in);
    if (m.name == "cblof") return fit_cblof(m.hp, in);
    return fit_ocsvm(m.hp, in);
  }

  std::vector<std::unique_ptr<Model>> members_;
  std::vector<std::string> used_;
  Standardizer score_scaler_;
  std::unique_ptr<GbdtModel> booster_;
};

inline std::unique_ptr<Model> fit_xgbod(const Hyperparams& p, const FitInput& in) {
  return std::make_unique<XgbodModel>(in.x, in.labels, in.n_total, hp::integer(p, "random_state", 0),
                                      gbdt_options_from(p));
}

}  // namespace imbench
