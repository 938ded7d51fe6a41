// End-to-end tests of the mtq executable: exit codes, output files, reruns.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("mtq_cli_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& content) {
    const auto p = dir_ / name;
    std::ofstream(p) << content;
    return p;
  }

  int run(const std::string& args) {
    const std::string cmd = std::string("\"") + MTQ_CLI + "\" " + args + " > \"" + (dir_ / "stdout.txt").string() +
                            "\" 2> \"" + (dir_ / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path dir_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

TEST_F(Cli, FluidReportsEquilibriumForConstantRates) {
  const auto cfg = write("c.json", R"({"model": {"q0": 3, "lambda": 2, "mu": 1, "theta": 1}, "horizon": 10})");
  ASSERT_EQ(run("fluid " + q(cfg) + " --out " + q(dir_ / "out")), 0);
  const auto r = load(dir_ / "out" / "report.json");
  EXPECT_NEAR(r["equilibrium"].get<double>(), 2.0, 1e-12);
  // q(t) = 2 + e^{-t} while above k = 1.
  EXPECT_NEAR(r["q_final"].get<double>(), 2.0 + std::exp(-10.0), 1e-7);
  EXPECT_EQ(r["regime"], "OVER");
  EXPECT_TRUE(fs::exists(dir_ / "out" / "fluid.csv"));
}

TEST_F(Cli, CriticalFixedPointStaysExactlyOne) {
  const auto cfg = write("c.json", R"({"model": {"q0": 1, "lambda": 1, "mu": 1, "theta": 3}, "horizon": 5})");
  ASSERT_EQ(run("fluid " + q(cfg) + " --out " + q(dir_ / "out")), 0);
  std::istringstream csv(slurp(dir_ / "out" / "fluid.csv"));
  std::string line;
  std::getline(csv, line);
  int rows = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string t, v;
    std::getline(row, t, ',');
    std::getline(row, v, ',');
    EXPECT_EQ(std::stod(v), 1.0) << line;
    ++rows;
  }
  EXPECT_GT(rows, 10);
}

TEST_F(Cli, MissingConfigExitsTwo) {
  EXPECT_EQ(run("fluid " + q(dir_ / "nope.json")), 2);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("error"), std::string::npos);
}

TEST_F(Cli, MalformedConfigsExitTwo) {
  EXPECT_EQ(run("fluid " + q(write("a.json", "{not json"))), 2);
  EXPECT_EQ(run("fluid " + q(write("b.json", R"({"model": {"lambda": 1, "lamda": 2}})"))), 2);
  EXPECT_EQ(run("fluid " + q(write("c.json", R"({"model": {"q0": 1}})"))), 2);
  EXPECT_EQ(run("fluid " + q(write("d.json", R"({"model": {"lambda": {"kind": "cubic"}}})"))), 2);
  EXPECT_EQ(run("fluid " + q(write("e.json", R"({"model": {"lambda": 1, "mu": -1}})"))), 2);
  EXPECT_EQ(run("simulate " + q(write("f.json", R"({"model": {"lambda": 1}, "n": 0})"))), 2);
}

TEST_F(Cli, UsageErrorsExitTwoAndHelpExitsZero) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, SimulateIsByteIdenticalAcrossRunsAndThreads) {
  const auto cfg =
      write("c.json", R"({"model": {"q0": 0.5, "lambda": 1.2, "mu": 1, "theta": 0.8}, "horizon": 3, "n": 50,
                          "replications": 40, "seed": 9, "grid_step": 0.25})");
  ASSERT_EQ(run("simulate " + q(cfg) + " --out " + q(dir_ / "a") + " --threads 1 --dump-paths 2"), 0);
  ASSERT_EQ(run("simulate " + q(cfg) + " --out " + q(dir_ / "b") + " --threads 3 --dump-paths 2"), 0);
  for (const auto* f : {"aggregate.csv", "summary.json", "paths/path_0.csv", "paths/path_1.csv"}) {
    ASSERT_TRUE(fs::exists(dir_ / "a" / f)) << f;
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
  ASSERT_EQ(run("simulate " + q(cfg) + " --out " + q(dir_ / "c") + " --seed 10"), 0);
  EXPECT_NE(slurp(dir_ / "a" / "aggregate.csv"), slurp(dir_ / "c" / "aggregate.csv"));
}

TEST_F(Cli, DiffusionWritesMomentsAndLaw) {
  const auto cfg = write("c.json", R"({"model": {"q0": 0.5, "lambda": 0.5, "mu": 1, "theta": 1}, "horizon": 2,
                                       "dt": 0.01, "paths": 50, "grid_step": 0.5})");
  ASSERT_EQ(run("diffusion " + q(cfg) + " --out " + q(dir_ / "a")), 0);
  ASSERT_EQ(run("diffusion " + q(cfg) + " --out " + q(dir_ / "b") + " --threads 2"), 0);
  for (const auto* f : {"moments.csv", "path.csv", "law.json"})
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  const auto law = load(dir_ / "a" / "law.json")["law"];
  EXPECT_EQ(law["kind"], "gaussian");
  EXPECT_NEAR(law["params"]["variance"].get<double>(), 0.5, 1e-15);
}

TEST_F(Cli, StationaryQedNormalizer) {
  ASSERT_EQ(run("stationary --lambda 1 --mu 1 --theta 2 --alpha 0 --q0 1 --out " + q(dir_ / "s")), 0);
  const auto j = load(dir_ / "s" / "law.json");
  EXPECT_EQ(j["kind"], "qed-piecewise");
  // C^{-1} = sqrt(pi/2) + sqrt(pi/(2 r)) with r = theta/mu = 2.
  const double pi = std::acos(-1.0);
  EXPECT_NEAR(j["C"].get<double>(), 1.0 / (std::sqrt(pi / 2.0) + std::sqrt(pi / 4.0)), 1e-12);
  EXPECT_EQ(j["regime"], "CRITICAL_AT");
  EXPECT_EQ(load(dir_ / "stdout.txt"), j);
}

TEST_F(Cli, StationaryGaussianRegimes) {
  ASSERT_EQ(run("stationary --lambda 0.5 --mu 1 --theta 1 --q0 0.5 --out " + q(dir_ / "qd")), 0);
  auto j = load(dir_ / "qd" / "law.json");
  EXPECT_EQ(j["kind"], "gaussian");
  EXPECT_TRUE(j["C"].is_null());
  EXPECT_NEAR(j["params"]["variance"].get<double>(), 0.5, 1e-15);
  ASSERT_EQ(run("stationary --lambda 2 --mu 1 --theta 0.5 --alpha 1 --q0 3 --out " + q(dir_ / "ed")), 0);
  j = load(dir_ / "ed" / "law.json");
  EXPECT_NEAR(j["params"]["mean"].get<double>(), 2.0, 1e-15);
  EXPECT_NEAR(j["params"]["variance"].get<double>(), 4.0, 1e-15);
  EXPECT_EQ(run("stationary --lambda 1 --mu 0"), 2);
}

TEST_F(Cli, ValidateExitCodes) {
  const auto ok = write("ok.json", R"({"checks": ["identity"]})");
  EXPECT_EQ(run("validate " + q(ok) + " --out " + q(dir_ / "v")), 0);
  EXPECT_TRUE(fs::exists(dir_ / "v" / "verdicts.csv"));
  EXPECT_TRUE(load(dir_ / "v" / "verdicts.json")["all_pass"].get<bool>());

  const auto bad = write("bad.json", R"({"checks": [{"check": "fluid_lln", "model": {"lambda": 1.2, "theta": 0.8},
      "n": 20, "replications": 4, "horizon": 1, "tolerance": {"sup_error": 0}}]})");
  EXPECT_EQ(run("validate " + q(bad) + " --out " + q(dir_ / "w")), 1);
  EXPECT_FALSE(load(dir_ / "w" / "verdicts.json")["all_pass"].get<bool>());

  EXPECT_EQ(run("validate " + q(write("u.json", R"({"checks": ["no_such_check"]})"))), 2);
  EXPECT_EQ(run("validate " + q(write("d.json", R"({"checks": ["identity", "identity"]})"))), 2);
}

TEST_F(Cli, ShippedConfigsSolve) {
  for (const auto* name : {"qd.json", "ed.json", "qed.json", "time_varying.json"}) {
    const auto cfg = fs::path(MTQ_SOURCE_DIR) / "configs" / name;
    ASSERT_EQ(run("fluid " + q(cfg) + " --out " + q(dir_ / name)), 0) << name;
    EXPECT_LE(load(dir_ / name / "report.json")["residual"].get<double>(), 1e-8) << name;
  }
}

TEST_F(Cli, ShippedAcceptanceExperimentMatchesSuite) {
  const std::string cmd = std::string("\"") + MTQ_ACCEPTANCE + "\" --dump-experiment > " + q(dir_ / "dump.json");
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(load(fs::path(MTQ_SOURCE_DIR) / "configs" / "acceptance.json"), load(dir_ / "dump.json"));
}

}  // namespace
