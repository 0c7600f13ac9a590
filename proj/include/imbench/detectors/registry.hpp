#pragma once

// Detector roster: stable names, categories, default grids, and a uniform
// fit/score wrapper that owns the standardizer.

#include <functional>
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
#include "imbench/detectors/xgbod.hpp"
#include "imbench/synth.hpp"

namespace imbench {

/// US: unsupervised, fitted on healthy rows only. SS: semi-supervised.
/// FS: fully supervised.
enum class Category { US, SS, FS };

inline const char* to_string(Category c) {
  switch (c) {
    case Category::US: return "US";
    case Category::SS: return "SS";
    case Category::FS: return "FS";
  }
  return "?";
}

struct DetectorSpec {
  std::string name;
  Category category = Category::US;
  std::vector<Hyperparams> grid;
};

inline const std::vector<std::string>& detector_names() {
  static const std::vector<std::string> names{"knn",   "lof", "cblof", "iforest",
                                              "ocsvm", "svm", "xgb",   "xgbod"};
  return names;
}

inline bool is_detector(const std::string& name) {
  const auto& n = detector_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

inline Category category_of(const std::string& name) {
  if (name == "xgbod") return Category::SS;
  if (name == "svm" || name == "xgb") return Category::FS;
  if (is_detector(name)) return Category::US;
  throw InvalidConfig("unknown detector '" + name + "'");
}

namespace detail {

/// Cartesian product of per-key value lists, first key varying slowest.
inline std::vector<Hyperparams> product(
    const std::vector<std::pair<std::string, std::vector<HpValue>>>& axes) {
  std::vector<Hyperparams> out{{}};
  for (const auto& [key, values] : axes) {
    std::vector<Hyperparams> next;
    next.reserve(out.size() * values.size());
    for (const auto& partial : out)
      for (const auto& v : values) {
        auto hp = partial;
        hp[key] = v;
        next.push_back(std::move(hp));
      }
    out = std::move(next);
  }
  return out;
}

inline std::vector<HpValue> ints(std::initializer_list<std::int64_t> v) { return {v.begin(), v.end()}; }
inline std::vector<HpValue> reals(std::initializer_list<double> v) { return {v.begin(), v.end()}; }
inline std::vector<HpValue> texts(std::initializer_list<const char*> v) {
  std::vector<HpValue> out;
  for (const char* s : v) out.emplace_back(std::string(s));
  return out;
}

inline std::vector<HpValue> neighbor_grid() {
  std::vector<HpValue> out{std::int64_t{3}, std::int64_t{5}, std::int64_t{7}};
  for (double f : {0.001, 0.01, 0.02, 0.03, 0.04, 0.06, 0.08, 0.10, 0.12, 0.15}) out.emplace_back(f);
  return out;
}

}  // namespace detail

/// Default hyperparameter grid for a detector, in enumeration order.
inline std::vector<Hyperparams> default_grid(const std::string& name) {
  using namespace detail;
  if (name == "knn" || name == "lof") return product({{"n_neighbors", neighbor_grid()}});
  if (name == "cblof") return product({{"n_clusters", ints({4, 6, 8, 10, 12})}});
  if (name == "iforest") {
    std::vector<HpValue> samples{std::string("auto")};
    for (double f : {0.5, 0.7, 0.8, 0.9}) samples.emplace_back(f);
    return product({{"n_estimators", ints({50, 75, 100})},
                    {"max_samples", samples},
                    {"random_state", ints({0, 1, 2, 3, 4})}});
  }
  if (name == "ocsvm")
    return product({{"kernel", texts({"sigmoid", "rbf", "linear"})},
                    {"gamma", texts({"auto", "scale"})},
                    {"nu", reals({0.3, 0.5, 0.7, 0.9})}});
  if (name == "svm")
    return product({{"kernel", texts({"sigmoid", "rbf", "linear"})},
                    {"gamma", texts({"auto", "scale"})},
                    {"c", reals({0.1, 0.3, 0.5, 0.7, 1.0, 1.2, 1.5, 1.7, 2.0})}});
  if (name == "xgb") return {Hyperparams{}};
  if (name == "xgbod") return product({{"random_state", ints({1, 2, 3, 4, 5})}});
  throw InvalidConfig("unknown detector '" + name + "'");
}

inline DetectorSpec default_spec(const std::string& name) {
  return {name, category_of(name), default_grid(name)};
}

inline std::vector<DetectorSpec> default_suite() {
  std::vector<DetectorSpec> out;
  for (const auto& n : detector_names()) out.push_back(default_spec(n));
  return out;
}

inline void validate(const DetectorSpec& spec) {
  if (!is_detector(spec.name)) throw InvalidConfig("unknown detector '" + spec.name + "'");
  if (spec.category != category_of(spec.name))
    throw InvalidConfig("detector '" + spec.name + "' has the wrong category");
  if (spec.grid.empty()) throw InvalidConfig("detector '" + spec.name + "' has an empty grid");
}

inline void validate(const std::vector<DetectorSpec>& suite) {
  if (suite.empty()) throw InvalidConfig("detector suite is empty");
  for (std::size_t i = 0; i < suite.size(); ++i) {
    validate(suite[i]);
    for (std::size_t j = 0; j < i; ++j)
      if (suite[j].name == suite[i].name) throw InvalidConfig("duplicate detector '" + suite[i].name + "'");
  }
}

/// A trained detector. Immutable once built; safe to score from several threads.
class FittedDetector {
 public:
  FittedDetector(std::string name, Hyperparams hp, Standardizer scaler, std::shared_ptr<const Model> model)
      : name_(std::move(name)), hp_(std::move(hp)), scaler_(std::move(scaler)), model_(std::move(model)) {}

  const std::string& name() const noexcept { return name_; }
  const Hyperparams& hyperparams() const noexcept { return hp_; }
  const Standardizer& standardizer() const noexcept { return scaler_; }
  const Model& model() const noexcept { return *model_; }

  std::vector<double> score(const Matrix& points) const {
    if (points.rows() == 0) return {};
    if (points.cols() != scaler_.dim()) throw ShapeError(name_ + ": dimension mismatch");
    auto s = model_->score(scaler_.transform(points));
    for (double v : s)
      if (!std::isfinite(v)) throw FitError(name_, to_string(hp_), "non-finite score");
    return s;
  }

 private:
  std::string name_;
  Hyperparams hp_;
  Standardizer scaler_;
  std::shared_ptr<const Model> model_;
};

namespace detail {

inline std::unique_ptr<Model> fit_model(const std::string& name, const Hyperparams& hp, const FitInput& in) {
  if (name == "knn") return fit_knn(hp, in);
  if (name == "lof") return fit_lof(hp, in);
  if (name == "cblof") return fit_cblof(hp, in);
  if (name == "iforest") return fit_iforest(hp, in);
  if (name == "ocsvm") return fit_ocsvm(hp, in);
  if (name == "svm") return fit_svm(hp, in);
  if (name == "xgb") return fit_xgb(hp, in);
  if (name == "xgbod") return fit_xgbod(hp, in);
  throw InvalidConfig("unknown detector '" + name + "'");
}

}  // namespace detail

/// Standardizes on all training rows, then fits. Unsupervised detectors see
/// the healthy rows only. Any failure is reported as a FitError.
inline FittedDetector fit(const DetectorSpec& spec, const Hyperparams& hp, const LabeledDataset& train) {
  const std::string hp_text = to_string(hp);
  if (train.size() == 0) throw FitError(spec.name, hp_text, "empty training set");
  const std::size_t n_faulty = train.count(Label::Faulty);
  if (spec.category != Category::US && (n_faulty == 0 || n_faulty == train.size()))
    throw FitError(spec.name, hp_text, "needs examples of both classes");

  try {
    Standardizer scaler = Standardizer::fit(train.points);
    std::unique_ptr<Model> model;
    if (spec.category == Category::US) {
      const auto healthy = train.indices_of(Label::Healthy);
      if (healthy.empty()) throw FitFailure("no healthy training points");
      const Matrix x = scaler.transform(train.points.select_rows(healthy));
      const std::vector<std::uint8_t> labels(healthy.size(), 0);
      model = detail::fit_model(spec.name, hp, {x, labels, train.size()});
    } else {
      const Matrix x = scaler.transform(train.points);
      model = detail::fit_model(spec.name, hp, {x, train.labels, train.size()});
    }
    return FittedDetector(spec.name, hp, std::move(scaler), std::shared_ptr<const Model>(std::move(model)));
  } catch (const FitFailure& e) {
    throw FitError(spec.name, hp_text, e.what());
  } catch (const EmptySample& e) {
    throw FitError(spec.name, hp_text, e.what());
  }
}

}  // namespace imbench
