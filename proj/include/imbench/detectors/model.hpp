#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "imbench/core.hpp"
#include "imbench/detectors/hyperparams.hpp"

namespace imbench {

/// Thrown from inside a detector's fitting routine; the registry rewraps it
/// as a FitError carrying the detector name and hyperparameters.
class FitFailure : public Error {
 public:
  using Error::Error;
};

/// Training data as seen by a detector: already standardized, already
/// filtered (one-class detectors receive healthy rows only).
struct FitInput {
  const Matrix& x;
  std::span<const std::uint8_t> labels;
  std::size_t n_total;  // training-set size before any filtering
};

/// A trained scoring function over standardized points; higher = more anomalous.
class Model {
 public:
  virtual ~Model() = default;
  virtual std::vector<double> score(const Matrix& x) const = 0;
};

}  // namespace imbench
