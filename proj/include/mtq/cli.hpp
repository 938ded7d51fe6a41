#pragma once

// Subcommand implementations behind the mtq executable. Each writes its
// files under an output directory and returns the process exit code
// (0 success / all checks pass, 1 check failure); configuration problems
// surface as ConfigError, which the executable maps to exit code 2.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mtq/config.hpp"
#include "mtq/csv.hpp"
#include "mtq/diffusion.hpp"
#include "mtq/fluid.hpp"
#include "mtq/mcsim.hpp"
#include "mtq/parallel.hpp"
#include "mtq/stats.hpp"
#include "mtq/validate.hpp"

namespace mtq::cli {

namespace fs = std::filesystem;

inline std::ofstream open_output(const fs::path& dir, const std::string& file) {
  fs::create_directories(dir);
  std::ofstream os(dir / file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + (dir / file).string());
  return os;
}

inline std::vector<double> uniform_grid(double horizon, double step) {
  std::vector<double> grid;
  const auto points = static_cast<std::size_t>(std::ceil(horizon / step - 1e-9));
  for (std::size_t i = 0; i <= points; ++i) grid.push_back(std::min(horizon, static_cast<double>(i) * step));
  return grid;
}

/// Constant-rate data needed by the closed-form analytics, if the model has it.
struct ConstantRates {
  double lambda, mu, theta, alpha, k;
};

inline std::optional<ConstantRates> constant_rates(const Model& m) {
  if (!m.has_constant_rates()) return std::nullopt;
  return ConstantRates{m.scheme.lambda.value(0.0), m.mu.value(0.0), m.theta.value(0.0), m.scheme.alpha.value(0.0),
                       m.scheme.k.value(0.0)};
}

struct FluidOptionsCli {
  std::optional<double> horizon, grid_step, tol;
};

inline int cmd_fluid(const fs::path& config, const fs::path& out, const FluidOptionsCli& opt, std::ostream& log) {
  const RunConfig rc = load_run_config(config);
  const double horizon = opt.horizon.value_or(rc.horizon);
  const FluidOptions fo{.tol = opt.tol.value_or(rc.tol), .grid_step = opt.grid_step.value_or(rc.grid_step)};
  if (!(horizon > 0.0) || !(fo.tol > 0.0) || !(fo.grid_step > 0.0))
    throw ConfigError("fluid: horizon, tol and grid step must be > 0");
  const auto fp = solve_fluid(rc.model.fluid_inputs(), horizon, fo);
  {
    auto os = open_output(out, "fluid.csv");
    write_fluid_csv(os, fp);
  }
  json report{{"name", rc.name},      {"horizon", horizon},        {"tol", fo.tol},
              {"q0", rc.model.scheme.q0}, {"q_final", fp.q().back()}, {"residual", fp.residual()},
              {"equilibrium", nullptr}, {"regime", nullptr}};
  if (const auto c = constant_rates(rc.model)) {
    report["equilibrium"] = fluid_equilibrium(c->lambda, c->mu, c->theta, c->k);
    if (c->k == 1.0) report["regime"] = std::string(to_string(regime_classify(c->lambda, c->mu, rc.model.scheme.q0)));
  }
  auto os = open_output(out, "report.json");
  os << report.dump(2) << "\n";
  log << "fluid: " << fp.grid().size() << " grid points, q(" << csv::num(horizon) << ") = " << csv::num(fp.q().back())
      << ", residual " << csv::num(fp.residual()) << "\n";
  return 0;
}

struct SimulateOptions {
  std::optional<std::int64_t> n, reps;
  std::optional<std::uint64_t> seed;
  std::int64_t dump_paths = 0;
  unsigned threads = 0;
};

inline int cmd_simulate(const fs::path& config, const fs::path& out, const SimulateOptions& opt, std::ostream& log) {
  const RunConfig rc = load_run_config(config);
  const std::int64_t n = opt.n.value_or(rc.n);
  const std::int64_t reps = opt.reps.value_or(rc.replications);
  const std::uint64_t seed = opt.seed.value_or(rc.seed);
  if (n < 1 || reps < 1) throw ConfigError("simulate: n and reps must be >= 1");
  if (opt.dump_paths < 0) throw ConfigError("simulate: --dump-paths must be >= 0");
  const auto grid = uniform_grid(rc.horizon, rc.grid_step);
  auto system = std::make_shared<const Prelimit>(prelimit(rc.model.scheme, n, rc.horizon));

  struct Rep {
    std::vector<double> scaled;
    std::array<std::int64_t, 3> counts{};
    std::string dump;
  };
  const auto results = run_replications(
      static_cast<std::size_t>(reps),
      [&](std::size_t r) {
        SimConfig cfg;
        cfg.model = rc.model;
        cfg.n = n;
        cfg.horizon = rc.horizon;
        cfg.seed = seed;
        cfg.stream = r;
        const auto sp = simulate(cfg, system);
        Rep rep;
        rep.counts = sp.counts;
        std::size_t ie = 0;
        std::int64_t q = sp.q0;
        for (double t : grid) {
          while (ie < sp.times.size() && sp.times[ie] <= t) q = sp.q[ie++];
          rep.scaled.push_back(static_cast<double>(q) / static_cast<double>(n));
        }
        if (static_cast<std::int64_t>(r) < opt.dump_paths) {
          std::ostringstream os;
          write_path_csv(os, sp);
          rep.dump = os.str();
        }
        return rep;
      },
      opt.threads);

  std::vector<RunningMoments> acc(grid.size());
  std::array<double, 3> mean_counts{0, 0, 0};
  for (const auto& rep : results) {
    for (std::size_t g = 0; g < grid.size(); ++g) acc[g].add(rep.scaled[g]);
    for (std::size_t i = 0; i < 3; ++i) mean_counts[i] += static_cast<double>(rep.counts[i]) / static_cast<double>(reps);
  }
  {
    auto os = open_output(out, "aggregate.csv");
    os << "t,mean_Qn_over_n,var,reps\n";
    for (std::size_t g = 0; g < grid.size(); ++g) csv::row(os, grid[g], acc[g].mean, acc[g].variance(), reps);
  }
  for (std::int64_t r = 0; r < std::min(opt.dump_paths, reps); ++r) {
    auto os = open_output(out / "paths", "path_" + std::to_string(r) + ".csv");
    os << results[static_cast<std::size_t>(r)].dump;
  }
  json summary{{"name", rc.name},
               {"n", n},
               {"replications", reps},
               {"seed", seed},
               {"horizon", rc.horizon},
               {"Q0", system->q0},
               {"mean_counts", {{"arrival", mean_counts[0]}, {"abandonment", mean_counts[1]}, {"service", mean_counts[2]}}}};
  auto os = open_output(out, "summary.json");
  os << summary.dump(2) << "\n";
  log << "simulate: n=" << n << " reps=" << reps << " seed=" << seed << ", mean Q/n at T = "
      << csv::num(acc.back().mean) << "\n";
  return 0;
}

/// Law of the stationary limit for constant rates with k = 1, gamma = 0.
inline std::optional<StationaryLaw> limit_law(const Model& m) {
  const auto c = constant_rates(m);
  if (!c || c->k != 1.0 || m.scheme.gamma.value(0.0) != 0.0) return std::nullopt;
  return stationary_law(c->lambda, c->mu, c->theta, c->alpha, m.scheme.q0);
}

struct DiffusionOptions {
  std::optional<double> dt, x0;
  std::optional<std::int64_t> paths;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

inline int cmd_diffusion(const fs::path& config, const fs::path& out, const DiffusionOptions& opt, std::ostream& log) {
  const RunConfig rc = load_run_config(config);
  const double dt = opt.dt.value_or(rc.dt);
  const std::int64_t paths = opt.paths.value_or(rc.paths);
  const std::uint64_t seed = opt.seed.value_or(rc.seed);
  const double x0 = opt.x0.value_or(rc.model.scheme.x0);
  if (!(dt > 0.0)) throw ConfigError("diffusion: dt must be > 0");
  if (paths < 1) throw ConfigError("diffusion: paths must be >= 1");
  const auto fp = solve_fluid(rc.model.fluid_inputs(), rc.horizon, {.tol = rc.tol});
  const DiffusionSolver solver(rc.model, fp, dt, rc.horizon);

  // Report at solver grid indices nearest to the uniform output grid.
  std::vector<std::size_t> idx;
  for (double t : uniform_grid(rc.horizon, rc.grid_step)) {
    const auto j = std::min(solver.steps(), static_cast<std::size_t>(std::llround(t / dt)));
    if (idx.empty() || idx.back() != j) idx.push_back(j);
  }
  const auto samples = run_replications(
      static_cast<std::size_t>(paths), [&](std::size_t r) { return solver.sample(x0, idx, seed, r); }, opt.threads);
  std::vector<RunningMoments> acc(idx.size());
  for (const auto& s : samples)
    for (std::size_t i = 0; i < idx.size(); ++i) acc[i].add(s[i]);
  {
    auto os = open_output(out, "moments.csv");
    os << "t,mean,var,n_paths\n";
    for (std::size_t i = 0; i < idx.size(); ++i) csv::row(os, solver.grid()[idx[i]], acc[i].mean, acc[i].variance(), paths);
  }
  {
    auto os = open_output(out, "path.csv");
    write_diffusion_csv(os, solver.path(x0, seed, 0));
  }
  json report{{"name", rc.name}, {"dt", dt}, {"paths", paths}, {"seed", seed}, {"x0", x0}, {"law", nullptr}};
  if (const auto law = limit_law(rc.model)) report["law"] = law_to_json(*law);
  auto os = open_output(out, "law.json");
  os << report.dump(2) << "\n";
  log << "diffusion: " << paths << " paths, dt=" << csv::num(dt) << ", mean X_T = " << csv::num(acc.back().mean)
      << ", var X_T = " << csv::num(acc.back().variance()) << "\n";
  return 0;
}

struct StationaryArgs {
  double lambda = 1.0, mu = 1.0, theta = 1.0, alpha = 0.0, q0 = 0.0;
};

inline StationaryArgs stationary_args_from_config(const fs::path& config) {
  const RunConfig rc = load_run_config(config);
  const auto c = constant_rates(rc.model);
  if (!c || c->k != 1.0 || rc.model.scheme.gamma.value(0.0) != 0.0)
    throw ConfigError("stationary: needs constant rates with k = 1 and gamma = 0");
  return {c->lambda, c->mu, c->theta, c->alpha, rc.model.scheme.q0};
}

inline int cmd_stationary(const StationaryArgs& a, const std::optional<fs::path>& out, std::ostream& log) {
  if (!(a.lambda > 0.0 && a.mu > 0.0 && a.theta > 0.0)) throw ConfigError("stationary: rates must be > 0");
  if (!(a.q0 >= 0.0)) throw ConfigError("stationary: q0 must be >= 0");
  const auto law = stationary_law(a.lambda, a.mu, a.theta, a.alpha, a.q0);
  json j = law_to_json(law);
  j["regime"] = std::string(to_string(regime_classify(a.lambda, a.mu, a.q0)));
  const auto [mean, var] = law.moments();
  j["moments"] = {{"mean", mean}, {"variance", var}};
  if (out) {
    auto os = open_output(*out, "law.json");
    os << j.dump(2) << "\n";
  }
  log << j.dump(2) << "\n";
  return 0;
}

inline void print_verdicts(std::ostream& os, const ExperimentResult& res) {
  std::size_t w = 9;
  for (const auto& v : res.verdicts) w = std::max(w, v.check.size() + v.statistic.size() + 3);
  for (const auto& v : res.verdicts) {
    os << (v.pass ? "PASS " : "FAIL ") << std::left << std::setw(static_cast<int>(w)) << (v.check + " : " + v.statistic)
       << " " << csv::num(v.value) << " " << v.relation << " " << csv::num(v.tolerance);
    if (!v.detail.empty()) os << "  (" << v.detail << ")";
    os << "\n";
  }
  os << (res.all_pass() ? "ALL PASS" : "SOME CHECKS FAILED") << "\n";
}

inline int cmd_validate(const fs::path& experiment, const fs::path& out, unsigned threads, std::ostream& log) {
  const json ex = read_json_file(experiment);
  const auto res = run_experiment(ex, experiment.parent_path(), out, threads);
  print_verdicts(log, res);
  return res.all_pass() ? 0 : 1;
}

}  // namespace mtq::cli
