#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "imbench/core.hpp"

namespace imbench {

using HpValue = std::variant<std::int64_t, double, std::string>;

/// One hyperparameter assignment. Keys are kept sorted so the textual form
/// is canonical.
using Hyperparams = std::map<std::string, HpValue>;

/// Shortest decimal form that round-trips through strtod.
inline std::string format_double(double v) {
  char buf[32];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string to_string(const HpValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::string>) return x;
        else if constexpr (std::is_same_v<T, double>) return format_double(x);
        else return std::to_string(x);
      },
      v);
}

/// "k1=v1;k2=v2" in key order; "default" for the empty assignment.
inline std::string to_string(const Hyperparams& hp) {
  if (hp.empty()) return "default";
  std::string out;
  for (const auto& [k, v] : hp) {
    if (!out.empty()) out += ';';
    out += k + '=' + to_string(v);
  }
  return out;
}

namespace hp {

inline bool has(const Hyperparams& p, const std::string& key) { return p.contains(key); }

inline double number(const Hyperparams& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  if (it == p.end()) return fallback;
  if (auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  if (auto* d = std::get_if<double>(&it->second)) return *d;
  throw InvalidConfig("hyperparameter '" + key + "' must be numeric");
}

inline std::int64_t integer(const Hyperparams& p, const std::string& key, std::int64_t fallback) {
  auto it = p.find(key);
  if (it == p.end()) return fallback;
  if (auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
  if (auto* d = std::get_if<double>(&it->second); d && std::floor(*d) == *d)
    return static_cast<std::int64_t>(*d);
  throw InvalidConfig("hyperparameter '" + key + "' must be an integer");
}

inline std::string text(const Hyperparams& p, const std::string& key, std::string fallback) {
  auto it = p.find(key);
  if (it == p.end()) return fallback;
  if (auto* s = std::get_if<std::string>(&it->second)) return *s;
  throw InvalidConfig("hyperparameter '" + key + "' must be a string");
}

/// Neighbour counts: integers are absolute, reals in (0, 1) are fractions of
/// the training size N rounded up.
inline std::size_t neighbor_count(const Hyperparams& p, const std::string& key,
                                  std::size_t n_train, std::int64_t fallback) {
  auto it = p.find(key);
  if (it == p.end()) return static_cast<std::size_t>(fallback);
  if (auto* i = std::get_if<std::int64_t>(&it->second)) {
    if (*i < 1) throw InvalidConfig("'" + key + "' must be >= 1");
    return static_cast<std::size_t>(*i);
  }
  if (auto* d = std::get_if<double>(&it->second)) {
    if (*d >= 1.0 && std::floor(*d) == *d) return static_cast<std::size_t>(*d);
    if (!(*d > 0.0 && *d < 1.0)) throw InvalidConfig("'" + key + "' fraction must lie in (0, 1)");
    // The small slack absorbs representation error such as 0.01 * 2000.
    const double k = std::ceil(*d * static_cast<double>(n_train) - 1e-9);
    return static_cast<std::size_t>(std::max(1.0, k));
  }
  throw InvalidConfig("'" + key + "' must be numeric");
}

}  // namespace hp

}  // namespace imbench
