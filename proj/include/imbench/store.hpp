#pragma once

// Record persistence (one JSON document per simulation), the consolidated
// CSV, and the resumable experiment sweep.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "imbench/config.hpp"
#include "imbench/parallel.hpp"
#include "imbench/pipeline.hpp"

namespace imbench {

namespace fs = std::filesystem;

/// I/O failure while reading or writing results.
class StoreError : public Error {
 public:
  using Error::Error;
};

// ---- JSON <-> records ------------------------------------------------------

inline HpValue hp_value_from_json(const nlohmann::json& v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) return v.get<double>();
  if (v.is_string()) return v.get<std::string>();
  throw StoreError("record: hyperparameter values must be numbers or strings");
}

inline nlohmann::json to_json(const AnomalySetting& a) {
  if (a.mode == AnomalySetting::Mode::Rate) return {{"mode", "rate"}, {"rate", a.rate}};
  return {{"mode", "count"}, {"count", a.count}};
}

inline AnomalySetting anomaly_from_json(const nlohmann::json& j) {
  if (j.at("mode") == "rate") return AnomalySetting::from_rate(j.at("rate").get<double>());
  return AnomalySetting::from_count(j.at("count").get<std::size_t>());
}

inline nlohmann::json to_json(const SimulationRecord& r) {
  nlohmann::json dets = nlohmann::json::array();
  for (const auto& d : r.detectors) {
    nlohmann::json j{{"name", d.name},
                     {"category", to_string(d.category)},
                     {"hyperparams", to_json(d.hp)},
                     {"validation_aucroc", d.validation_aucroc},
                     {"validation_fpr", d.validation_fpr},
                     {"validation_fnr", d.validation_fnr},
                     {"test_aucroc", d.test_aucroc},
                     {"test_fpr", d.test_fpr},
                     {"test_fnr", d.test_fnr},
                     {"threshold", d.threshold},
                     {"excluded_hp_count", d.excluded_hp_count}};
    if (d.wall_seconds) j["wall_seconds"] = *d.wall_seconds;
    dets.push_back(std::move(j));
  }
  return {{"scenario", r.scenario},
          {"n_train_nominal", r.n_train_nominal},
          {"n_train", r.n_train},
          {"n_faulty", r.n_faulty},
          {"anomaly", to_json(r.anomaly)},
          {"simulation_index", r.simulation_index},
          {"seed", r.seed},
          {"target_fpr", r.target_fpr},
          {"threshold_mode", to_string(r.threshold_mode)},
          {"n_test", r.n_test},
          {"status", r.complete() ? "complete" : "excluded"},
          {"reason", r.reason},
          {"ground_truth", {{"aucroc", r.gt_aucroc}, {"fpr", r.gt_fpr}, {"fnr", r.gt_fnr}, {"flagged", r.gt_flagged}}},
          {"detectors", dets}};
}

inline SimulationRecord record_from_json(const nlohmann::json& j) {
  SimulationRecord r;
  try {
    r.scenario = j.at("scenario").get<std::string>();
    r.n_train_nominal = j.at("n_train_nominal").get<std::size_t>();
    r.n_train = j.at("n_train").get<std::size_t>();
    r.n_faulty = j.at("n_faulty").get<std::size_t>();
    r.anomaly = anomaly_from_json(j.at("anomaly"));
    r.simulation_index = j.at("simulation_index").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.target_fpr = j.at("target_fpr").get<double>();
    r.threshold_mode = parse_threshold_mode(j.at("threshold_mode").get<std::string>());
    r.n_test = j.at("n_test").get<std::size_t>();
    r.status = j.at("status") == "complete" ? SimulationRecord::Status::Complete
                                            : SimulationRecord::Status::Excluded;
    r.reason = j.at("reason").get<std::string>();
    const auto& gt = j.at("ground_truth");
    r.gt_aucroc = gt.at("aucroc").get<double>();
    r.gt_fpr = gt.at("fpr").get<double>();
    r.gt_fnr = gt.at("fnr").get<double>();
    r.gt_flagged = gt.at("flagged").get<bool>();
    for (const auto& dj : j.at("detectors")) {
      DetectorOutcome d;
      d.name = dj.at("name").get<std::string>();
      d.category = category_of(d.name);
      for (const auto& [k, v] : dj.at("hyperparams").items()) d.hp[k] = hp_value_from_json(v);
      d.validation_aucroc = dj.at("validation_aucroc").get<double>();
      d.validation_fpr = dj.at("validation_fpr").get<double>();
      d.validation_fnr = dj.at("validation_fnr").get<double>();
      d.test_aucroc = dj.at("test_aucroc").get<double>();
      d.test_fpr = dj.at("test_fpr").get<double>();
      d.test_fnr = dj.at("test_fnr").get<double>();
      d.threshold = dj.at("threshold").get<double>();
      d.excluded_hp_count = dj.at("excluded_hp_count").get<std::size_t>();
      if (dj.contains("wall_seconds")) d.wall_seconds = dj.at("wall_seconds").get<double>();
      r.detectors.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw StoreError(std::string("malformed record: ") + e.what());
  } catch (const InvalidConfig& e) {
    throw StoreError(std::string("malformed record: ") + e.what());
  }
  return r;
}

// ---- files -----------------------------------------------------------------

/// Writes via a sibling temporary file and rename, so readers never see a
/// partial file.
inline void write_atomic(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw StoreError("cannot create " + path.parent_path().string() + ": " + ec.message());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) throw StoreError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw StoreError("cannot rename " + tmp.string() + ": " + ec.message());
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline fs::path record_path(const fs::path& root, const std::string& scenario, std::size_t size,
                            const AnomalySetting& anomaly, std::size_t index) {
  return root / scenario / std::to_string(size) / anomaly.key() / (std::to_string(index) + ".json");
}

inline fs::path record_path(const fs::path& root, const SimulationRecord& r) {
  return record_path(root, r.scenario, r.n_train_nominal, r.anomaly, r.simulation_index);
}

inline void save_record(const fs::path& root, const SimulationRecord& r) {
  write_atomic(record_path(root, r), to_json(r).dump(2) + "\n");
}

inline SimulationRecord load_record(const fs::path& path) {
  try {
    return record_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw StoreError(path.string() + ": " + e.what());
  } catch (const StoreError& e) {
    throw StoreError(path.string() + ": " + e.what());
  }
}

/// True for "<scenario>/<size>/<anomaly>/<index>.json"; report files and
/// temporaries elsewhere under the results root are ignored.
inline bool is_record_path(const fs::path& relative) {
  const auto parts = std::distance(relative.begin(), relative.end());
  const std::string stem = relative.stem().string();
  return parts == 4 && relative.extension() == ".json" && !stem.empty() &&
         std::all_of(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

/// Every record under root, ordered by (scenario, size, anomaly, index).
inline std::vector<SimulationRecord> load_records(const fs::path& root) {
  if (!fs::is_directory(root)) throw StoreError(root.string() + " is not a directory");
  std::vector<fs::path> paths;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && is_record_path(fs::relative(e.path(), root))) paths.push_back(e.path());
  std::vector<SimulationRecord> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(load_record(p));
  std::sort(out.begin(), out.end(), [](const SimulationRecord& a, const SimulationRecord& b) {
    const auto ka = std::make_tuple(a.scenario, a.n_train_nominal, a.anomaly.mode, a.anomaly.rate, a.anomaly.count,
                                    a.simulation_index);
    const auto kb = std::make_tuple(b.scenario, b.n_train_nominal, b.anomaly.mode, b.anomaly.rate, b.anomaly.count,
                                    b.simulation_index);
    return ka < kb;
  });
  return out;
}

// ---- CSV -------------------------------------------------------------------

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline constexpr const char* kRecordCsvHeader =
    "scenario,n_train_nominal,anomaly,simulation_index,seed,n_train,n_faulty,status,reason,"
    "detector,category,hyperparams,validation_aucroc,validation_fpr,validation_fnr,"
    "test_aucroc,test_fpr,test_fnr,threshold,excluded_hp_count,gt_aucroc,gt_fpr,gt_fnr,gt_flagged";

/// One row per detector per simulation; an excluded simulation is one row
/// with empty detector columns. Wall time is deliberately left out so the
/// file depends only on the configuration.
inline std::string records_csv(const std::vector<SimulationRecord>& records) {
  std::string out = std::string(kRecordCsvHeader) + "\n";
  auto num = [](double v) { return format_double(v); };
  for (const auto& r : records) {
    const std::string prefix = csv_field(r.scenario) + "," + std::to_string(r.n_train_nominal) + "," +
                               r.anomaly.key() + "," + std::to_string(r.simulation_index) + "," +
                               std::to_string(r.seed) + "," + std::to_string(r.n_train) + "," +
                               std::to_string(r.n_faulty) + "," + (r.complete() ? "complete" : "excluded") + "," +
                               csv_field(r.reason) + ",";
    const std::string gt = num(r.gt_aucroc) + "," + num(r.gt_fpr) + "," + num(r.gt_fnr) + "," +
                           (r.gt_flagged ? "1" : "0");
    if (r.detectors.empty()) {
      out += prefix + ",,,,,,,,,,," + (r.complete() ? gt : ",,,") + "\n";
      continue;
    }
    for (const auto& d : r.detectors) {
      out += prefix + d.name + "," + to_string(d.category) + "," + csv_field(to_string(d.hp)) + "," +
             num(d.validation_aucroc) + "," + num(d.validation_fpr) + "," + num(d.validation_fnr) + "," +
             num(d.test_aucroc) + "," + num(d.test_fpr) + "," + num(d.test_fnr) + "," + num(d.threshold) + "," +
             std::to_string(d.excluded_hp_count) + "," + gt + "\n";
    }
  }
  return out;
}

// ---- sweep -----------------------------------------------------------------

struct SweepCoordinate {
  std::size_t scenario = 0;  // index into ExperimentConfig::scenarios
  std::size_t size = 0;
  AnomalySetting anomaly;
  std::size_t repetition = 0;
};

/// Cartesian sweep in config order: scenarios, sizes, anomaly settings, repetitions.
inline std::vector<SweepCoordinate> sweep_coordinates(const ExperimentConfig& cfg) {
  std::vector<SweepCoordinate> out;
  for (std::size_t s = 0; s < cfg.scenarios.size(); ++s)
    for (auto size : cfg.sizes)
      for (const auto& a : cfg.anomaly_settings())
        for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) out.push_back({s, size, a, rep});
  return out;
}

inline std::uint64_t simulation_seed(std::uint64_t master_seed, const std::string& scenario, std::size_t size,
                                     const AnomalySetting& anomaly, std::size_t repetition) {
  return derive_seed(master_seed, {tag("simulation"), tag(scenario), size, tag(anomaly.key()), repetition});
}

inline SimulationConfig simulation_config(const ExperimentConfig& cfg, const SweepCoordinate& c) {
  SimulationConfig s;
  s.scenario = cfg.scenarios[c.scenario];
  s.n_train_nominal = c.size;
  s.size_jitter = cfg.size_jitter;
  s.anomaly = c.anomaly;
  s.test_batches = cfg.test_batches;
  s.test_batch_size = cfg.test_batch_size;
  s.test_anomaly_rate = cfg.test_anomaly_rate;
  s.target_fpr = cfg.target_fpr;
  s.threshold_mode = cfg.threshold_mode;
  s.simulation_index = c.repetition;
  s.seed = simulation_seed(cfg.master_seed, s.scenario.name, c.size, c.anomaly, c.repetition);
  s.record_timing = cfg.record_timing;
  return s;
}

struct SweepOptions {
  bool resume = false;
  std::size_t parallelism = 0;  // 0 = use the config value
  /// Called once per finished (or reused) record, serialized across threads.
  std::function<void(const SimulationRecord&, bool reused)> on_record;
};

inline constexpr const char* kConsolidatedCsv = "results.csv";

/// Runs (or resumes) the sweep, persisting each record as it completes, and
/// writes the consolidated CSV. Returns records in sweep order.
inline std::vector<SimulationRecord> run_experiment(const ExperimentConfig& cfg, const SweepOptions& opt = {}) {
  validate(cfg.detectors);
  const fs::path root = effective_output_dir(cfg);
  const auto coords = sweep_coordinates(cfg);
  std::vector<SimulationRecord> records(coords.size());
  std::vector<std::size_t> pending;
  std::mutex callback_mutex;

  for (std::size_t i = 0; i < coords.size(); ++i) {
    const auto& c = coords[i];
    const auto path = record_path(root, cfg.scenarios[c.scenario].name, c.size, c.anomaly, c.repetition);
    if (opt.resume && fs::exists(path)) {
      const auto expected = simulation_config(cfg, c);
      SimulationRecord r = load_record(path);
      if (r.seed == expected.seed) {
        if (opt.on_record) opt.on_record(r, true);
        records[i] = std::move(r);
        continue;
      }
    }
    pending.push_back(i);
  }

  const std::size_t threads = opt.parallelism > 0 ? opt.parallelism : cfg.parallelism;
  parallel_for(pending.size(), threads, [&](std::size_t j) {
    const std::size_t i = pending[j];
    SimulationRecord r = run_simulation(simulation_config(cfg, coords[i]), cfg.detectors);
    save_record(root, r);
    if (opt.on_record) {
      std::lock_guard lock(callback_mutex);
      opt.on_record(r, false);
    }
    records[i] = std::move(r);
  });

  write_atomic(root / kConsolidatedCsv, records_csv(records));
  return records;
}

}  // namespace imbench
