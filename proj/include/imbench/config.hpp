#pragma once

// Experiment configuration: a versioned JSON document. Unknown keys are
// rejected and every error names the line it refers to.

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "imbench/detectors/registry.hpp"
#include "imbench/pipeline.hpp"

namespace imbench {

inline constexpr int kConfigSchemaVersion = 1;

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::vector<ScenarioSpec> scenarios;
  std::vector<std::size_t> sizes;
  std::size_t size_jitter = 2;
  std::vector<double> anomaly_rates;
  std::vector<std::size_t> anomaly_counts;
  std::size_t repetitions = 1;
  std::vector<DetectorSpec> detectors;
  double target_fpr = 0.01;
  std::size_t test_batches = 40;
  std::size_t test_batch_size = 1024;
  double test_anomaly_rate = 0.5;
  ThresholdMode threshold_mode = ThresholdMode::TestHealthy;
  std::uint64_t master_seed = 0;
  std::string output_dir;  // empty: see effective_output_dir
  std::size_t parallelism = 1;
  bool record_timing = false;

  /// Rates first, then counts, each in declared order.
  std::vector<AnomalySetting> anomaly_settings() const {
    std::vector<AnomalySetting> out;
    for (double r : anomaly_rates) out.push_back(AnomalySetting::from_rate(r));
    for (auto c : anomaly_counts) out.push_back(AnomalySetting::from_count(c));
    return out;
  }
};

inline constexpr const char* kOutputDirEnv = "IMBENCH_OUTPUT_DIR";

/// The configured output directory, else $IMBENCH_OUTPUT_DIR, else "results".
inline std::string effective_output_dir(const ExperimentConfig& c) {
  if (!c.output_dir.empty()) return c.output_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "results";
}

namespace detail {

/// Maps JSON pointers ("/detectors/2/grid") to the 1-based line where the
/// value starts. Assumes syntactically valid input.
class JsonLineIndex {
 public:
  explicit JsonLineIndex(const std::string& text) : text_(text) {
    skip_ws();
    value("");
  }

  std::size_t line(const std::string& pointer) const {
    // Fall back to the closest enclosing value that was indexed.
    std::string p = pointer;
    while (true) {
      if (auto it = lines_.find(p); it != lines_.end()) return it->second;
      if (p.empty()) return 1;
      p.erase(p.rfind('/'));
    }
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  std::string string_token() {
    std::string out;
    ++pos_;  // opening quote
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\') {
        ++pos_;
        if (pos_ < text_.size() && text_[pos_] != 'u') out += text_[pos_];
      } else {
        out += text_[pos_];
      }
      ++pos_;
    }
    ++pos_;  // closing quote
    return out;
  }

  static std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }

  void value(const std::string& pointer) {
    lines_.emplace(pointer, line_);
    if (pos_ >= text_.size()) return;
    const char c = text_[pos_];
    if (c == '{') {
      ++pos_;
      skip_ws();
      while (pos_ < text_.size() && text_[pos_] != '}') {
        const std::string key = string_token();
        skip_ws();
        ++pos_;  // ':'
        skip_ws();
        value(pointer + "/" + escape(key));
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') ++pos_;
        skip_ws();
      }
      ++pos_;
    } else if (c == '[') {
      ++pos_;
      skip_ws();
      for (std::size_t i = 0; pos_ < text_.size() && text_[pos_] != ']'; ++i) {
        value(pointer + "/" + std::to_string(i));
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') ++pos_;
        skip_ws();
      }
      ++pos_;
    } else if (c == '"') {
      string_token();
    } else {
      while (pos_ < text_.size() && !std::strchr(",]} \t\r\n", text_[pos_])) ++pos_;
    }
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::map<std::string, std::size_t> lines_;
};

/// Typed field access with line-anchored errors.
class ConfigReader {
 public:
  ConfigReader(const std::string& source, const std::string& text) : source_(source), index_(text) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& what) const {
    throw InvalidConfig(source_ + ":" + std::to_string(index_.line(pointer)) + ": " +
                        (pointer.empty() ? "" : pointer + ": ") + what);
  }

  void allow_only(const nlohmann::json& obj, const std::string& pointer,
                  std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(pointer, "expected an object");
    for (const auto& [k, v] : obj.items()) {
      bool known = false;
      for (const char* allowed : keys) known = known || k == allowed;
      if (!known) fail(pointer + "/" + k, "unknown field '" + k + "'");
    }
  }

  std::uint64_t unsigned_int(const nlohmann::json& v, const std::string& pointer) const {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    fail(pointer, "expected a non-negative integer");
  }

  double number(const nlohmann::json& v, const std::string& pointer) const {
    if (!v.is_number()) fail(pointer, "expected a number");
    return v.get<double>();
  }

  std::string text(const nlohmann::json& v, const std::string& pointer) const {
    if (!v.is_string()) fail(pointer, "expected a string");
    return v.get<std::string>();
  }

  const nlohmann::json& array(const nlohmann::json& v, const std::string& pointer) const {
    if (!v.is_array()) fail(pointer, "expected an array");
    return v;
  }

 private:
  std::string source_;
  JsonLineIndex index_;
};

inline ScenarioSpec parse_scenario(const ConfigReader& r, const nlohmann::json& v, const std::string& ptr) {
  if (v.is_string()) {
    const auto name = v.get<std::string>();
    if (!is_preset(name)) r.fail(ptr, "unknown scenario preset '" + name + "'");
    return preset(name);
  }
  r.allow_only(v, ptr, {"name", "d", "mu", "sigma2_a", "sigma2_b", "n_clusters", "placement_seed"});
  for (const char* required : {"name", "d", "mu", "sigma2_a", "sigma2_b"})
    if (!v.contains(required)) r.fail(ptr, std::string("missing field '") + required + "'");
  ScenarioSpec s;
  s.name = r.text(v["name"], ptr + "/name");
  if (s.name.empty() || s.name.find_first_of("/\\.") != std::string::npos)
    r.fail(ptr + "/name", "scenario names must be non-empty and contain no '/', '\\' or '.'");
  if (is_preset(s.name)) r.fail(ptr + "/name", "'" + s.name + "' is reserved for the preset");
  s.d = r.unsigned_int(v["d"], ptr + "/d");
  s.mu = r.number(v["mu"], ptr + "/mu");
  s.sigma2_a = r.number(v["sigma2_a"], ptr + "/sigma2_a");
  s.sigma2_b = r.number(v["sigma2_b"], ptr + "/sigma2_b");
  if (v.contains("n_clusters")) s.n_clusters = r.unsigned_int(v["n_clusters"], ptr + "/n_clusters");
  if (v.contains("placement_seed")) s.placement_seed = r.unsigned_int(v["placement_seed"], ptr + "/placement_seed");
  try {
    validate(s);
  } catch (const InvalidScenario& e) {
    r.fail(ptr, e.what());
  }
  return s;
}

inline HpValue parse_hp_value(const ConfigReader& r, const nlohmann::json& v, const std::string& ptr) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) return v.get<double>();
  if (v.is_string()) return v.get<std::string>();
  r.fail(ptr, "hyperparameter values must be numbers or strings");
}

inline DetectorSpec parse_detector(const ConfigReader& r, const nlohmann::json& v, const std::string& ptr) {
  if (v.is_string()) {
    const auto name = v.get<std::string>();
    if (!is_detector(name)) r.fail(ptr, "unknown detector '" + name + "'");
    return default_spec(name);
  }
  r.allow_only(v, ptr, {"name", "grid"});
  if (!v.contains("name")) r.fail(ptr, "missing field 'name'");
  const auto name = r.text(v["name"], ptr + "/name");
  if (!is_detector(name)) r.fail(ptr + "/name", "unknown detector '" + name + "'");
  DetectorSpec spec = default_spec(name);
  if (v.contains("grid")) {
    const auto& grid = r.array(v["grid"], ptr + "/grid");
    if (grid.empty()) r.fail(ptr + "/grid", "grid must not be empty");
    spec.grid.clear();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const std::string gp = ptr + "/grid/" + std::to_string(i);
      if (!grid[i].is_object()) r.fail(gp, "grid entries must be objects");
      Hyperparams hp;
      for (const auto& [k, value] : grid[i].items()) hp[k] = parse_hp_value(r, value, gp + "/" + k);
      spec.grid.push_back(std::move(hp));
    }
  }
  return spec;
}

}  // namespace detail

/// Parses and validates a configuration document. `source` names the input
/// in error messages.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Translate the byte offset into a line number.
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw InvalidConfig(source + ":" + std::to_string(line) + ": malformed JSON: " + e.what());
  }
  const detail::ConfigReader r(source, text);
  r.allow_only(doc, "",
               {"schema_version", "scenarios", "sizes", "size_jitter", "anomaly_rates", "anomaly_counts",
                "repetitions", "detectors", "target_fpr", "test_batches", "test_batch_size", "test_anomaly_rate",
                "threshold_mode", "master_seed", "output_dir", "parallelism", "record_timing"});
  for (const char* required : {"schema_version", "scenarios", "sizes", "detectors"})
    if (!doc.contains(required)) r.fail("", std::string("missing field '") + required + "'");

  ExperimentConfig c;
  if (!doc["schema_version"].is_number_integer() || doc["schema_version"].get<int>() != kConfigSchemaVersion)
    r.fail("/schema_version", "unsupported schema_version (expected " + std::to_string(kConfigSchemaVersion) + ")");

  const auto& scenarios = r.array(doc["scenarios"], "/scenarios");
  if (scenarios.empty()) r.fail("/scenarios", "at least one scenario required");
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto ptr = "/scenarios/" + std::to_string(i);
    c.scenarios.push_back(detail::parse_scenario(r, scenarios[i], ptr));
    for (std::size_t j = 0; j < i; ++j)
      if (c.scenarios[j].name == c.scenarios[i].name) r.fail(ptr, "duplicate scenario '" + c.scenarios[i].name + "'");
  }

  if (doc.contains("size_jitter")) c.size_jitter = r.unsigned_int(doc["size_jitter"], "/size_jitter");
  const auto& sizes = r.array(doc["sizes"], "/sizes");
  if (sizes.empty()) r.fail("/sizes", "at least one size required");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const auto ptr = "/sizes/" + std::to_string(i);
    c.sizes.push_back(r.unsigned_int(sizes[i], ptr));
    if (c.sizes.back() <= c.size_jitter + kMinFaultyForCv) r.fail(ptr, "size too small");
  }

  if (doc.contains("anomaly_rates")) {
    const auto& rates = r.array(doc["anomaly_rates"], "/anomaly_rates");
    for (std::size_t i = 0; i < rates.size(); ++i) {
      const auto ptr = "/anomaly_rates/" + std::to_string(i);
      const double v = r.number(rates[i], ptr);
      if (!(v > 0.0 && v < 1.0)) r.fail(ptr, "rates must lie in (0, 1)");
      c.anomaly_rates.push_back(v);
    }
  }
  if (doc.contains("anomaly_counts")) {
    const auto& counts = r.array(doc["anomaly_counts"], "/anomaly_counts");
    for (std::size_t i = 0; i < counts.size(); ++i)
      c.anomaly_counts.push_back(r.unsigned_int(counts[i], "/anomaly_counts/" + std::to_string(i)));
  }
  if (c.anomaly_rates.empty() && c.anomaly_counts.empty())
    r.fail("", "at least one of anomaly_rates or anomaly_counts required");

  if (doc.contains("repetitions")) {
    c.repetitions = r.unsigned_int(doc["repetitions"], "/repetitions");
    if (c.repetitions < 1) r.fail("/repetitions", "must be >= 1");
  }

  const auto& detectors = r.array(doc["detectors"], "/detectors");
  if (detectors.empty()) r.fail("/detectors", "at least one detector required");
  for (std::size_t i = 0; i < detectors.size(); ++i) {
    const auto ptr = "/detectors/" + std::to_string(i);
    c.detectors.push_back(detail::parse_detector(r, detectors[i], ptr));
    for (std::size_t j = 0; j < i; ++j)
      if (c.detectors[j].name == c.detectors[i].name) r.fail(ptr, "duplicate detector '" + c.detectors[i].name + "'");
  }

  auto proportion = [&](const char* key, double& field) {
    if (!doc.contains(key)) return;
    const std::string ptr = std::string("/") + key;
    field = r.number(doc[key], ptr);
    if (!(field > 0.0 && field < 1.0)) r.fail(ptr, "must lie in (0, 1)");
  };
  proportion("target_fpr", c.target_fpr);
  proportion("test_anomaly_rate", c.test_anomaly_rate);
  if (doc.contains("test_batches")) {
    c.test_batches = r.unsigned_int(doc["test_batches"], "/test_batches");
    if (c.test_batches < 1) r.fail("/test_batches", "must be >= 1");
  }
  if (doc.contains("test_batch_size")) {
    c.test_batch_size = r.unsigned_int(doc["test_batch_size"], "/test_batch_size");
    if (c.test_batch_size < 2) r.fail("/test_batch_size", "must be >= 2");
  }
  const auto faulty_per_batch =
      std::llround(c.test_anomaly_rate * static_cast<double>(c.test_batch_size));
  if (faulty_per_batch < 1 || static_cast<std::size_t>(faulty_per_batch) >= c.test_batch_size)
    r.fail("/test_batch_size", "test batches must contain both classes");
  if (doc.contains("threshold_mode")) {
    try {
      c.threshold_mode = parse_threshold_mode(r.text(doc["threshold_mode"], "/threshold_mode"));
    } catch (const InvalidConfig& e) {
      r.fail("/threshold_mode", e.what());
    }
  }
  if (doc.contains("master_seed")) c.master_seed = r.unsigned_int(doc["master_seed"], "/master_seed");
  if (doc.contains("output_dir")) c.output_dir = r.text(doc["output_dir"], "/output_dir");
  if (doc.contains("parallelism")) {
    c.parallelism = r.unsigned_int(doc["parallelism"], "/parallelism");
    if (c.parallelism < 1) r.fail("/parallelism", "must be >= 1");
  }
  if (doc.contains("record_timing")) {
    if (!doc["record_timing"].is_boolean()) r.fail("/record_timing", "expected true or false");
    c.record_timing = doc["record_timing"].get<bool>();
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig(path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

inline nlohmann::json to_json(const HpValue& v) {
  return std::visit([](const auto& x) { return nlohmann::json(x); }, v);
}

inline nlohmann::json to_json(const Hyperparams& hp) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [k, v] : hp) out[k] = to_json(v);
  return out;
}

inline nlohmann::json to_json(const ScenarioSpec& s) {
  if (is_preset(s.name) && s == preset(s.name)) return s.name;
  return {{"name", s.name},         {"d", s.d},
          {"mu", s.mu},             {"sigma2_a", s.sigma2_a},
          {"sigma2_b", s.sigma2_b}, {"n_clusters", s.n_clusters},
          {"placement_seed", s.placement_seed}};
}

/// Full serialization; parse_config(to_json(c).dump()) reproduces c.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json scenarios = nlohmann::json::array();
  for (const auto& s : c.scenarios) scenarios.push_back(to_json(s));
  nlohmann::json detectors = nlohmann::json::array();
  for (const auto& d : c.detectors) {
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& hp : d.grid) grid.push_back(to_json(hp));
    detectors.push_back({{"name", d.name}, {"grid", grid}});
  }
  return {{"schema_version", c.schema_version},
          {"scenarios", scenarios},
          {"sizes", c.sizes},
          {"size_jitter", c.size_jitter},
          {"anomaly_rates", c.anomaly_rates},
          {"anomaly_counts", c.anomaly_counts},
          {"repetitions", c.repetitions},
          {"detectors", detectors},
          {"target_fpr", c.target_fpr},
          {"test_batches", c.test_batches},
          {"test_batch_size", c.test_batch_size},
          {"test_anomaly_rate", c.test_anomaly_rate},
          {"threshold_mode", to_string(c.threshold_mode)},
          {"master_seed", c.master_seed},
          {"output_dir", c.output_dir},
          {"parallelism", c.parallelism},
          {"record_timing", c.record_timing}};
}

}  // namespace imbench
