#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
Run run(const std::string& args) {
  const std::string cmd = std::string("\"") + IMBENCH_CLI + "\" " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (const auto n = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("imbench-cli-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream b;
  b << in.rdbuf();
  return b.str();
}

}  // namespace

TEST(Cli, ValidateShippedConfig) {
  const auto r = run("validate --config \"" + std::string(IMBENCH_CONFIG_DIR) + "/s1_preset.json\"");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("400 simulations"), std::string::npos) << r.out;
}

TEST(Cli, ValidateRejectsBadConfigWithLine) {
  const auto dir = scratch("bad");
  std::ofstream(dir / "bad.json") << "{\n  \"schema_version\": 1,\n  \"sizes\": \"many\"\n}\n";
  const auto r = run("validate --config \"" + (dir / "bad.json").string() + "\"");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("bad.json:"), std::string::npos) << r.out;
  fs::remove_all(dir);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("aggregate --results /nonexistent-imbench-dir").code, 1);
  EXPECT_EQ(run("gt-estimate --scenario S9 --batches 1 --batch-size 16").code, 1);
}

TEST(Cli, GroundTruthEstimate) {
  const auto r = run("gt-estimate --scenario S1 --batches 256 --batch-size 1024");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 2u);
  EXPECT_EQ(ls[0], "scenario,target_fpr,fpr,fnr,aucroc,n_per_class,seed");
  std::vector<std::string> f;
  std::istringstream row(ls[1]);
  for (std::string c; std::getline(row, c, ',');) f.push_back(c);
  ASSERT_EQ(f.size(), 7u);
  EXPECT_EQ(f[0], "S1");
  EXPECT_EQ(f[5], "262144");
  EXPECT_NEAR(std::stod(f[2]), 0.01, 1.0 / 262144.0 + 1e-12);
  EXPECT_NEAR(std::stod(f[3]), 0.074, 0.01);
  EXPECT_NEAR(std::stod(f[4]), 0.99, 0.005);
}

TEST(Cli, SimulateThenAggregate) {
  const auto dir = scratch("sweep");
  std::ofstream(dir / "cfg.json") << R"({
  "schema_version": 1,
  "scenarios": ["S1"],
  "sizes": [150],
  "anomaly_counts": [8, 12],
  "repetitions": 2,
  "detectors": [{"name": "knn", "grid": [{"n_neighbors": 5}]},
                {"name": "xgb", "grid": [{"n_estimators": 5}]}],
  "test_batches": 2,
  "test_batch_size": 64
})";
  const auto out = dir / "results";
  const auto sim = run("simulate --quiet --config \"" + (dir / "cfg.json").string() + "\" --output-dir \"" +
                       out.string() + "\"");
  ASSERT_EQ(sim.code, 0) << sim.out;
  EXPECT_NE(sim.out.find("records: 4"), std::string::npos) << sim.out;
  EXPECT_TRUE(fs::exists(out / "results.csv"));

  const auto agg = run("aggregate --results \"" + out.string() + "\" --report ranks");
  ASSERT_EQ(agg.code, 0) << agg.out;
  const auto csv = lines(slurp(out / "reports" / "ranks.csv"));
  ASSERT_EQ(csv.size(), 1u + 2 * 2);  // header, two groups of two detectors
  EXPECT_EQ(csv[0].rfind("scenario,n_train_nominal,anomaly,detector", 0), 0u);

  // A second aggregate must not trip over the report files it wrote.
  EXPECT_EQ(run("aggregate --results \"" + out.string() + "\"").code, 0);
  fs::remove_all(dir);
}
