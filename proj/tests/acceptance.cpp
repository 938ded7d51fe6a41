// Acceptance suite: runs the shipped validation experiment and prints one
// PASS/FAIL line per criterion. Tolerances and seeds are pinned below; the
// same experiment is shipped as configs/acceptance.json (checked by cli_test).
//
//   acceptance [--threads N] [--keep DIR] [--dump-experiment]

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <string>
#include <unistd.h>

#include "mtq/validate.hpp"

namespace {

using mtq::json;
namespace fs = std::filesystem;

json constant_model(double q0, double lambda, double mu, double theta, double alpha = 0.0, double k = 1.0) {
  return {{"q0", q0}, {"x0", 0.0}, {"lambda", lambda}, {"alpha", alpha}, {"k", k}, {"gamma", 0.0}, {"mu", mu}, {"theta", theta}};
}

json acceptance_experiment() {
  json checks = json::array();
  checks.push_back({{"name", "c1_fluid_lln"},
                    {"check", "fluid_lln"},
                    {"model", constant_model(0.0, 1.2, 1.0, 0.8)},
                    {"n", {2500, 10000}},
                    {"replications", 100},
                    {"horizon", 10.0},
                    {"grid_step", 0.01},
                    {"seed", 1001},
                    {"tolerance", {{"sup_error", 0.05}, {"fraction", 0.95}, {"median_ratio", 0.5}}}});
  checks.push_back({{"name", "c2_fluid_tracking"},
                    {"check", "fluid_tracking"},
                    {"model",
                     {{"q0", 0.0},
                      {"lambda", {{"kind", "sinusoidal"}, {"params", {1.0, 0.5, 1.0, 0.0}}}},
                      {"k", {{"kind", "sinusoidal"}, {"params", {1.0, 0.25, 0.5, 0.0}}}},
                      {"mu", 1.0},
                      {"theta", 1.0}}},
                    {"n", 10000},
                    {"replications", 100},
                    {"horizon", 20.0},
                    {"grid_step", 0.01},
                    {"seed", 1002},
                    {"tolerance", {{"sup_error", 0.05}, {"fraction", 0.95}}}});
  for (double alpha : {0.0, 1.0})
    checks.push_back({{"name", alpha == 0.0 ? "c3_qd_alpha0" : "c3_qd_alpha1"},
                      {"check", "diffusion_clt"},
                      {"model", constant_model(0.5, 0.5, 1.0, 1.0, alpha)},
                      {"n", 400},
                      {"replications", 2000},
                      {"horizon", 10.0},
                      {"seed", alpha == 0.0 ? 1003 : 1013},
                      {"tolerance", {{"ks_level", 0.01}}}});
  checks.push_back({{"name", "c4_ed"},
                    {"check", "diffusion_clt"},
                    {"model", constant_model(3.0, 2.0, 1.0, 0.5)},
                    {"n", 400},
                    {"replications", 2000},
                    {"horizon", 16.0},
                    {"seed", 1004},
                    {"tolerance", {{"ks_level", 0.01}}}});
  checks.push_back({{"name", "c5_qed"},
                    {"check", "qed_stationary"},
                    {"model", constant_model(1.0, 1.0, 1.0, 2.0)},
                    {"n", 400},
                    {"replications", 2000},
                    {"horizon", 30.0},
                    {"seed", 1005},
                    {"tolerance", {{"ks_level", 0.01}, {"mean_z", 4.0}, {"variance_z", 4.0}}}});
  checks.push_back({{"name", "c6_critical_sensitivity"},
                    {"check", "critical_sensitivity"},
                    {"lambda", 1.0},
                    {"mu", 1.0},
                    {"theta", 4.0},
                    {"alpha", 0.0},
                    {"q0", {0.5, 1.5}},
                    {"paths", 2000},
                    {"horizon", 30.0},
                    {"dt", 0.001},
                    {"seed", 1006},
                    {"tolerance", {{"relative_variance_error", 0.15}, {"ordering_margin", 0.0}}}});
  checks.push_back({{"name", "c7_martingales"},
                    {"check", "martingale_structure"},
                    {"model", constant_model(1.25, 1.2, 1.0, 0.8)},
                    {"n", 100},
                    {"replications", 10000},
                    {"t", 1.0},
                    {"seed", 1007},
                    {"tolerance",
                     {{"mean_z", 4.0}, {"variance_relative_error", 0.05}, {"covariance_z", 4.0}, {"max_jump_deviation", 0.0}}}});
  checks.push_back({{"name", "c8_bd_oracle"},
                    {"check", "bd_oracle"},
                    {"systems",
                     {{{"label", "mm2m"}, {"n", 1}, {"model", constant_model(0.0, 2.0, 1.0, 1.0, 0.0, 2.0)}},
                      {{"label", "mm3m"}, {"n", 1}, {"model", constant_model(0.0, 4.0, 1.0, 2.0, 0.0, 3.0)}}}},
                    {"horizon", 5000.0},
                    {"seed", 1008},
                    {"tolerance", {{"tv", 0.02}}}});
  checks.push_back({{"name", "c9_solver_consistency"},
                    {"check", "solver_consistency"},
                    {"configs", {"qd.json", "ed.json", "qed.json", "time_varying.json"}},
                    {"em",
                     {{"model", constant_model(3.0, 2.0, 1.0, 0.5, 0.5)},
                      {"x0", 1.0},
                      {"dt", 0.02},
                      {"horizon", 2.0},
                      {"paths", 10000},
                      {"seed", 1009}}},
                    {"tolerance", {{"fluid_residual", 1e-8}, {"qed_normalizer", 1e-10}, {"em_band", 1.0}}}});
  return {{"name", "acceptance"}, {"seed", 1000}, {"checks", checks}};
}

const std::map<std::string, int> criterion_of{
    {"c1_fluid_lln", 1},   {"c2_fluid_tracking", 2}, {"c3_qd_alpha0", 3},   {"c3_qd_alpha1", 3},
    {"c4_ed", 4},          {"c5_qed", 5},            {"c6_critical_sensitivity", 6},
    {"c7_martingales", 7}, {"c8_bd_oracle", 8},      {"c9_solver_consistency", 9}};

const char* criterion_title[] = {"",
                                 "fluid LLN, constant rates",
                                 "fluid tracking, time-varying rates",
                                 "diffusion CLT, QD regime (alpha = 0 and 1)",
                                 "diffusion CLT, ED regime",
                                 "QED stationary law and moments",
                                 "initial-condition sensitivity at criticality",
                                 "martingale structure",
                                 "birth-death oracle equivalence",
                                 "solver self-consistency",
                                 "byte-identical rerun"};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Lists the files where two output trees differ (missing or unequal bytes).
std::vector<std::string> tree_differences(const fs::path& a, const fs::path& b, std::size_t& files) {
  std::vector<std::string> diffs;
  files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(e.path(), a);
    if (!fs::exists(b / rel) || read_file(e.path()) != read_file(b / rel)) diffs.push_back(rel.string());
  }
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file() && !fs::exists(a / fs::relative(e.path(), b))) diffs.push_back(fs::relative(e.path(), b).string());
  return diffs;
}

}  // namespace

int main(int argc, char** argv) {
  unsigned threads = 0;
  fs::path keep;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--dump-experiment")) {
      std::cout << acceptance_experiment().dump(2) << "\n";
      return 0;
    }
    if (!std::strcmp(argv[i], "--threads") && i + 1 < argc) {
      threads = static_cast<unsigned>(std::stoul(argv[++i]));
    } else if (!std::strcmp(argv[i], "--keep") && i + 1 < argc) {
      keep = argv[++i];
    } else {
      std::cerr << "usage: acceptance [--threads N] [--keep DIR] [--dump-experiment]\n";
      return 2;
    }
  }

  const fs::path configs = fs::path(MTQ_SOURCE_DIR) / "configs";
  const fs::path root = keep.empty() ? fs::temp_directory_path() / ("mtq_acceptance_" + std::to_string(::getpid())) : keep;
  fs::remove_all(root);
  const json experiment = acceptance_experiment();

  try {
    const auto t0 = std::chrono::steady_clock::now();
    const auto first = mtq::run_experiment(experiment, configs, root / "run1", threads);
    const auto t1 = std::chrono::steady_clock::now();

    std::map<int, std::vector<const mtq::Verdict*>> by_criterion;
    for (const auto& v : first.verdicts) by_criterion[criterion_of.at(v.check)].push_back(&v);
    bool all = true;
    for (int c = 1; c <= 9; ++c) {
      bool pass = !by_criterion[c].empty();
      for (const auto* v : by_criterion[c]) pass = pass && v->pass;
      all = all && pass;
      std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c << ": " << criterion_title[c] << "\n";
      for (const auto* v : by_criterion[c])
        std::cout << "       " << (v->pass ? "ok  " : "FAIL") << " " << v->check << " " << v->statistic << " = "
                  << mtq::csv::num(v->value) << " " << v->relation << " " << mtq::csv::num(v->tolerance)
                  << (v->detail.empty() ? "" : "  (" + v->detail + ")") << "\n";
    }

    // Criterion 10: rerun with a different worker count and compare every output byte.
    const unsigned other = threads == 1 ? 2 : 1;
    mtq::run_experiment(experiment, configs, root / "run2", other);
    std::size_t files = 0;
    const auto diffs = tree_differences(root / "run1", root / "run2", files);
    const bool same = diffs.empty() && files > 0;
    all = all && same;
    std::cout << (same ? "PASS" : "FAIL") << " criterion 10: " << criterion_title[10] << "\n"
              << "       " << files << " files compared, " << diffs.size() << " differ";
    for (const auto& d : diffs) std::cout << " " << d;
    std::cout << "\n";
    std::cout << "first run took " << std::chrono::duration<double>(t1 - t0).count() << " s\n";
    if (keep.empty()) fs::remove_all(root);
    std::cout << (all ? "ACCEPTANCE: ALL PASS" : "ACCEPTANCE: FAILURES") << "\n";
    return all ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
