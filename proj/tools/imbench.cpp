// imbench: ground-truth estimation, simulation sweeps and report generation.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "imbench/config.hpp"
#include "imbench/oracle.hpp"
#include "imbench/report.hpp"
#include "imbench/store.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct GtArgs {
  std::string scenario = "S1";
  std::string config;
  std::size_t batches = 10240;
  std::size_t batch_size = 1024;
  std::uint64_t seed = 0;
  double target_fpr = 0.01;
  std::size_t threads = 1;
};

imbench::ScenarioSpec resolve_scenario(const GtArgs& a) {
  if (a.config.empty()) return imbench::preset(a.scenario);
  for (const auto& s : imbench::load_config(a.config).scenarios)
    if (s.name == a.scenario) return s;
  throw imbench::InvalidConfig("scenario '" + a.scenario + "' not found in " + a.config);
}

int gt_estimate(const GtArgs& a) {
  const auto spec = resolve_scenario(a);
  const auto dist = imbench::build_tvs(spec);
  const auto m = imbench::estimate_gt_metrics(dist, a.target_fpr, a.batches, a.batch_size, a.seed, a.threads);
  std::cout << "scenario,target_fpr,fpr,fnr,aucroc,n_per_class,seed\n"
            << spec.name << ',' << imbench::format_double(m.target_fpr) << ',' << imbench::format_double(m.fpr) << ','
            << imbench::format_double(m.fnr) << ',' << imbench::format_double(m.aucroc) << ',' << m.n_points << ','
            << m.seed << '\n';
  return kExitOk;
}

struct SimulateArgs {
  std::string config;
  bool resume = false;
  std::size_t parallelism = 0;
  std::string output_dir;
  bool quiet = false;
};

int simulate(const SimulateArgs& a) {
  auto cfg = imbench::load_config(a.config);
  if (!a.output_dir.empty()) cfg.output_dir = a.output_dir;
  const auto total = imbench::sweep_coordinates(cfg).size();
  std::size_t done = 0, excluded = 0;
  imbench::SweepOptions opt;
  opt.resume = a.resume;
  opt.parallelism = a.parallelism;
  opt.on_record = [&](const imbench::SimulationRecord& r, bool reused) {
    ++done;
    if (!r.complete()) ++excluded;
    if (a.quiet) return;
    std::cerr << '[' << done << '/' << total << "] " << r.scenario << ' ' << r.n_train_nominal << ' '
              << r.anomaly.key() << " #" << r.simulation_index << ' '
              << (reused ? "reused" : r.complete() ? "complete" : "excluded (" + r.reason + ")")
              << (r.gt_flagged ? " [ground-truth AUCROC outside expected band]" : "") << '\n';
  };
  imbench::run_experiment(cfg, opt);
  const auto root = imbench::effective_output_dir(cfg);
  std::cout << "records: " << total << " (" << excluded << " excluded)\n"
            << "consolidated: " << (imbench::fs::path(root) / imbench::kConsolidatedCsv).string() << '\n';
  return kExitOk;
}

struct AggregateArgs {
  std::string results;
  std::string report = "all";
  std::string out;
};

int aggregate(const AggregateArgs& a) {
  std::vector<imbench::ReportKind> kinds;
  for (const auto& [name, kind] : imbench::report_kinds())
    if (a.report == "all" || a.report == name) kinds.push_back(kind);
  if (kinds.empty()) throw imbench::InvalidConfig("unknown report '" + a.report + "'");
  const auto records = imbench::load_records(a.results);
  const imbench::fs::path out = a.out.empty() ? imbench::fs::path(a.results) / "reports" : imbench::fs::path(a.out);
  for (const auto& p : imbench::write_reports(records, kinds, out)) std::cout << p.string() << '\n';
  return kExitOk;
}

int validate_config(const std::string& path) {
  const auto cfg = imbench::load_config(path);
  std::cout << path << ": ok (" << imbench::sweep_coordinates(cfg).size() << " simulations, "
            << cfg.detectors.size() << " detectors)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anomaly-detection benchmark under extreme class imbalance"};
  app.require_subcommand(1);

  GtArgs gt;
  auto* gt_cmd = app.add_subcommand("gt-estimate", "Monte-Carlo metrics of the Bayes-optimal scorer");
  gt_cmd->add_option("--scenario", gt.scenario, "Preset name (S1, S2) or a scenario of --config")->capture_default_str();
  gt_cmd->add_option("--config", gt.config, "Experiment config providing custom scenarios")->check(CLI::ExistingFile);
  gt_cmd->add_option("--batches", gt.batches, "Batches per class")->capture_default_str()->check(CLI::PositiveNumber);
  gt_cmd->add_option("--batch-size", gt.batch_size, "Points per batch")->capture_default_str()->check(CLI::Range(2, 1 << 30));
  gt_cmd->add_option("--seed", gt.seed, "Sampling seed")->capture_default_str();
  gt_cmd->add_option("--target-fpr", gt.target_fpr, "Target false-positive rate")->capture_default_str();
  gt_cmd->add_option("--threads", gt.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run an experiment sweep");
  sim_cmd->add_option("--config", sim.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sim_cmd->add_flag("--resume", sim.resume, "Skip simulations whose records already exist");
  sim_cmd->add_option("--parallelism", sim.parallelism, "Override the config's parallelism");
  sim_cmd->add_option("--output-dir", sim.output_dir, "Override the config's output directory");
  sim_cmd->add_flag("--quiet", sim.quiet, "No per-simulation progress on stderr");

  AggregateArgs agg;
  auto* agg_cmd = app.add_subcommand("aggregate", "Build report tables from stored records");
  agg_cmd->add_option("--results", agg.results, "Results directory")->required()->check(CLI::ExistingDirectory);
  agg_cmd->add_option("--report", agg.report, "ranks | cd | category-max | bounds | selection | all")
      ->capture_default_str()
      ->check(CLI::IsMember({"ranks", "cd", "category-max", "bounds", "selection", "all"}));
  agg_cmd->add_option("--out", agg.out, "Report directory (default <results>/reports)");

  std::string validate_path;
  auto* val_cmd = app.add_subcommand("validate", "Check a config without running it");
  val_cmd->add_option("--config", validate_path, "Experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gt_cmd) return gt_estimate(gt);
    if (*sim_cmd) return simulate(sim);
    if (*agg_cmd) return aggregate(agg);
    if (*val_cmd) return validate_config(validate_path);
  } catch (const imbench::InvalidConfig& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const imbench::InvalidScenario& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
