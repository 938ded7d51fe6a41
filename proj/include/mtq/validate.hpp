#pragma once

// Named validation checks driven by an experiment file, each producing
// verdict rows (statistic, value, relation, tolerance, pass) and CSV outputs.
//
// Experiment layout:
//   {"name": ..., "seed": <default seed>,
//    "checks": [{"name": <label>, "check": <registered check>, ...parameters...,
//                "tolerance": {<statistic>: <value>, ...}}, ...]}
// A bare string entry runs the registered check of that name with defaults.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mtq/config.hpp"
#include "mtq/csv.hpp"
#include "mtq/diffusion.hpp"
#include "mtq/fluid.hpp"
#include "mtq/mcsim.hpp"
#include "mtq/parallel.hpp"
#include "mtq/quadrature.hpp"
#include "mtq/stats.hpp"

namespace mtq {

struct Verdict {
  std::string check;
  std::string statistic;
  double value = 0.0;
  std::string relation;  // "<=", ">=" or ">"
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

inline bool compare(double value, const std::string& relation, double tolerance) {
  if (relation == "<=") return value <= tolerance;
  if (relation == ">=") return value >= tolerance;
  if (relation == ">") return value > tolerance;
  throw std::logic_error("unknown relation " + relation);
}

class CheckContext {
 public:
  CheckContext(std::string name, json params, std::filesystem::path base_dir, std::filesystem::path out_dir,
               std::uint64_t default_seed, unsigned threads)
      : name_(std::move(name)),
        params_(std::move(params)),
        base_dir_(std::move(base_dir)),
        out_dir_(std::move(out_dir)),
        default_seed_(default_seed),
        threads_(threads) {}

  const std::string& name() const noexcept { return name_; }
  const json& params() const noexcept { return params_; }
  unsigned threads() const noexcept { return threads_; }
  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir_ / path;
  }

  double number(const std::string& key, double fallback) const {
    return detail::number_field(params_, key, fallback, name_);
  }
  double positive(const std::string& key, double fallback) const {
    return detail::positive_field(params_, key, fallback, name_);
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback, std::int64_t min = 1) const {
    return detail::integer_field(params_, key, fallback, min, name_);
  }
  std::uint64_t seed() const { return detail::seed_field(params_, "seed", default_seed_, name_); }
  Model model(const std::string& key = "model") const {
    if (!params_.contains(key)) throw ConfigError(name_ + "." + key + ": required");
    return parse_model(params_[key], name_ + "." + key);
  }

  /// Tolerance for a statistic, overridable through the "tolerance" map.
  double tolerance(const std::string& statistic, double fallback) const {
    if (!params_.contains("tolerance")) return fallback;
    const auto& t = params_["tolerance"];
    if (!t.is_object()) throw ConfigError(name_ + ".tolerance: expected an object");
    return detail::number_field(t, statistic, fallback, name_ + ".tolerance");
  }

  void verdict(const std::string& statistic, double value, const std::string& relation, double tolerance,
               std::string detail = {}) {
    verdicts_.push_back({name_, statistic, value, relation, tolerance, compare(value, relation, tolerance),
                         std::move(detail)});
  }

  /// Writes <out>/<check name>/<file> when an output directory is set.
  void write(const std::string& file, const std::string& content) const {
    if (out_dir_.empty()) return;
    const auto dir = out_dir_ / name_;
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / file, std::ios::binary);
    os << content;
    if (!os) throw std::runtime_error("cannot write " + (dir / file).string());
  }

  std::vector<Verdict> take() { return std::move(verdicts_); }

 private:
  std::string name_;
  json params_;
  std::filesystem::path base_dir_, out_dir_;
  std::uint64_t default_seed_;
  unsigned threads_;
  std::vector<Verdict> verdicts_;
};

using CheckFn = std::function<void(CheckContext&)>;

namespace checks {

inline std::string fmt(double x) { return csv::num(x); }

inline void require_constant_unit_capacity(const Model& m, const std::string& what) {
  if (!m.has_constant_rates()) throw ConfigError(what + ": this check needs constant rates");
  if (m.scheme.k.value(0.0) != 1.0 || m.scheme.gamma.value(0.0) != 0.0)
    throw ConfigError(what + ": this check needs k = 1 and gamma = 0");
}

/// Fluid fixed point at criticality: q0 = 1, lambda = mu = 1 keeps q exactly 1.
inline void identity(CheckContext& ctx) {
  FluidInputs in;
  in.q0 = 1.0;
  in.lambda = RateFunction::constant(1.0);
  in.mu = RateFunction::constant(1.0);
  in.theta = RateFunction::constant(ctx.positive("theta", 0.7));
  in.k = RateFunction::constant(1.0);
  const auto fp = solve_fluid(in, ctx.positive("horizon", 20.0), {.grid_step = 0.5});
  double dev = 0.0;
  for (double q : fp.q()) dev = std::max(dev, std::abs(q - 1.0));
  ctx.verdict("max_deviation", dev, "<=", ctx.tolerance("max_deviation", 0.0));
}

/// Theorem 1: sup over a grid of |Q^n_t / n - q_t| across seeded runs. With
/// several n, the median sup error should shrink like n^{-1/2}.
inline void fluid_lln(CheckContext& ctx) {
  const Model model = ctx.model();
  std::vector<std::int64_t> ns;
  const auto& p = ctx.params();
  if (p.contains("n") && p["n"].is_array()) {
    for (const auto& v : p["n"]) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 1) throw ConfigError(ctx.name() + ".n: positive integers");
      ns.push_back(v.get<std::int64_t>());
    }
  } else {
    ns.push_back(ctx.integer("n", 10000));
  }
  if (ns.empty()) throw ConfigError(ctx.name() + ".n: empty list");
  const auto reps = static_cast<std::size_t>(ctx.integer("replications", 100));
  const double horizon = ctx.positive("horizon", 10.0);
  const double step = ctx.positive("grid_step", 0.01);
  const std::uint64_t seed = ctx.seed();
  const double sup_tol = ctx.tolerance("sup_error", 0.05);

  const auto fp = solve_fluid(model.fluid_inputs(), horizon);
  std::vector<double> grid;
  const auto points = static_cast<std::size_t>(std::llround(horizon / step));
  for (std::size_t i = 0; i <= points; ++i) grid.push_back(std::min(horizon, static_cast<double>(i) * step));

  std::ostringstream out;
  out << "n,replication,sup_error\n";
  std::vector<double> medians;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const std::int64_t n = ns[i];
    auto system = std::make_shared<const Prelimit>(prelimit(model.scheme, n, horizon));
    const auto errors = run_replications(
        reps,
        [&](std::size_t r) {
          SimConfig cfg;
          cfg.model = model;
          cfg.n = n;
          cfg.horizon = horizon;
          cfg.seed = seed + i;
          cfg.stream = r;
          const auto sp = simulate(cfg, system);
          const auto sc = scaled_paths(sp, fp, n, grid);
          double sup = 0.0;
          for (std::size_t g = 0; g < grid.size(); ++g) sup = std::max(sup, std::abs(sc.fluid_scaled[g] - fp.at(grid[g])));
          return sup;
        },
        ctx.threads());
    std::size_t within = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      csv::row(out, n, r, errors[r]);
      if (errors[r] <= sup_tol) ++within;
    }
    medians.push_back(median(errors));
    if (i + 1 == ns.size())
      ctx.verdict("fraction_within[n=" + std::to_string(n) + "]",
                  static_cast<double>(within) / static_cast<double>(reps), ">=", ctx.tolerance("fraction", 0.95),
                  "sup_error<=" + fmt(sup_tol) + " median=" + fmt(medians.back()));
  }
  if (ns.size() >= 2)
    ctx.verdict("median_ratio[n=" + std::to_string(ns.back()) + "/n=" + std::to_string(ns.front()) + "]",
                medians.back() / medians.front(), "<=", ctx.tolerance("median_ratio", 0.5),
                "medians " + fmt(medians.front()) + " -> " + fmt(medians.back()));
  ctx.write("sup_errors.csv", out.str());
}

/// Theorems 2-3: KS test of X^n_T = sqrt(n)(Q^n_T / n - q_T) against the
/// stationary limit law, optionally with moment comparisons.
inline void diffusion_clt(CheckContext& ctx, bool moments_default) {
  const Model model = ctx.model();
  require_constant_unit_capacity(model, ctx.name());
  const std::int64_t n = ctx.integer("n", 400);
  const auto reps = static_cast<std::size_t>(ctx.integer("replications", 2000));
  const double lambda = model.scheme.lambda.value(0.0), mu = model.mu.value(0.0), theta = model.theta.value(0.0);
  const double burn_in = 8.0 / std::min(mu, theta);
  const double horizon = ctx.positive("horizon", burn_in);
  const std::uint64_t seed = ctx.seed();
  const auto law = stationary_law(lambda, mu, theta, model.scheme.alpha.value(0.0), model.scheme.q0);

  const auto fp = solve_fluid(model.fluid_inputs(), horizon);
  const double q_t = fp.at(horizon);
  const double sn = std::sqrt(static_cast<double>(n));
  auto system = std::make_shared<const Prelimit>(prelimit(model.scheme, n, horizon));
  const auto xs = run_replications(
      reps,
      [&](std::size_t r) {
        SimConfig cfg;
        cfg.model = model;
        cfg.n = n;
        cfg.horizon = horizon;
        cfg.seed = seed;
        cfg.stream = r;
        cfg.record.path = false;
        const auto sp = simulate(cfg, system);
        return sn * (static_cast<double>(sp.q_final) / static_cast<double>(n) - q_t);
      },
      ctx.threads());

  std::ostringstream out;
  out << "replication,x\n";
  for (std::size_t r = 0; r < reps; ++r) csv::row(out, r, xs[r]);
  ctx.write("samples.csv", out.str());

  const auto ks = ks_statistic(EmpiricalSample(xs), [&](double x) { return law.cdf(x); });
  const auto [law_mean, law_var] = law.moments();
  std::ostringstream desc;
  desc << to_string(law.kind) << " mean=" << fmt(law_mean) << " var=" << fmt(law_var) << " D=" << fmt(ks.statistic);
  ctx.verdict("ks_p_value", ks.p_value, ">=", ctx.tolerance("ks_level", 0.01), desc.str());
  if (ctx.params().value("moments", moments_default)) {
    const auto m = moments(EmpiricalSample(xs));
    ctx.verdict("mean_z", std::abs(m.mean - law_mean) / m.se_mean, "<=", ctx.tolerance("mean_z", 4.0),
                "sample=" + fmt(m.mean) + " law=" + fmt(law_mean));
    ctx.verdict("variance_z", std::abs(m.variance - law_var) / m.se_variance, "<=", ctx.tolerance("variance_z", 4.0),
                "sample=" + fmt(m.variance) + " law=" + fmt(law_var));
  }
}

/// Theorem 3 case split at lambda = mu: the diffusion limit started from
/// q0 below or above 1 settles at variance lambda/mu or lambda/theta.
inline void critical_sensitivity(CheckContext& ctx) {
  const auto& p = ctx.params();
  const double lambda = ctx.positive("lambda", 1.0), mu = ctx.positive("mu", 1.0), theta = ctx.positive("theta", 4.0);
  const double alpha = ctx.number("alpha", 0.0), x0 = ctx.number("x0", 0.0);
  std::vector<double> q0s{0.5, 1.5};
  if (p.contains("q0")) q0s = detail::number_list(p["q0"], ctx.name() + ".q0");
  const auto paths = static_cast<std::size_t>(ctx.integer("paths", 2000));
  const double horizon = ctx.positive("horizon", 30.0), dt = ctx.positive("dt", 1e-3);
  const std::uint64_t seed = ctx.seed();
  const double rel_tol = ctx.tolerance("relative_variance_error", 0.15);

  std::ostringstream out;
  out << "q0,replication,x\n";
  std::vector<double> sample_var, target_var;
  for (std::size_t i = 0; i < q0s.size(); ++i) {
    Model m;
    m.scheme.q0 = q0s[i];
    m.scheme.x0 = x0;
    m.scheme.lambda = RateFunction::constant(lambda);
    m.scheme.alpha = RateFunction::constant(alpha, true);
    m.mu = RateFunction::constant(mu);
    m.theta = RateFunction::constant(theta);
    const auto fp = solve_fluid(m.fluid_inputs(), horizon);
    const DiffusionSolver solver(m, fp, dt, horizon);
    const auto xs =
        run_replications(paths, [&](std::size_t r) { return solver.terminal(x0, seed + i, r); }, ctx.threads());
    for (std::size_t r = 0; r < paths; ++r) csv::row(out, q0s[i], r, xs[r]);
    const double var = moments(EmpiricalSample(xs)).variance;
    const double target = stationary_law(lambda, mu, theta, alpha, q0s[i]).variance;
    sample_var.push_back(var);
    target_var.push_back(target);
    ctx.verdict("relative_variance_error[q0=" + fmt(q0s[i]) + "]", std::abs(var - target) / target, "<=", rel_tol,
                "sample=" + fmt(var) + " target=" + fmt(target) + " side=" +
                    (fp.side_at(horizon) == Side::above ? "above" : fp.side_at(horizon) == Side::below ? "below" : "on"));
  }
  // Sample variances must be strictly ordered as the targets are.
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < q0s.size(); ++i) {
    const double sign = target_var[i] > target_var[i + 1] ? 1.0 : -1.0;
    margin = std::min(margin, sign * (sample_var[i] - sample_var[i + 1]));
  }
  if (q0s.size() >= 2) ctx.verdict("ordering_margin", margin, ">", ctx.tolerance("ordering_margin", 0.0));
  ctx.write("terminal_values.csv", out.str());
}

/// Eqs. (2)-(4): scaled martingales at time t have mean 0, variance equal
/// to the mean compensator, zero cross-covariances and jumps of 1/sqrt(n).
inline void martingale_structure(CheckContext& ctx) {
  const Model model = ctx.model();
  const std::int64_t n = ctx.integer("n", 100);
  const auto reps = static_cast<std::size_t>(ctx.integer("replications", 10000));
  const double t = ctx.positive("t", 1.0);
  const std::uint64_t seed = ctx.seed();
  const double rn = static_cast<double>(n), sn = std::sqrt(rn);
  auto system = std::make_shared<const Prelimit>(prelimit(model.scheme, n, t));

  struct Row {
    std::array<double, 3> m{}, qv{};
    std::array<double, 3> jump{};
    std::array<std::int64_t, 3> counts{};
  };
  const auto rows = run_replications(
      reps,
      [&](std::size_t r) {
        SimConfig cfg;
        cfg.model = model;
        cfg.n = n;
        cfg.horizon = t;
        cfg.seed = seed;
        cfg.stream = r;
        cfg.record.martingales = true;
        cfg.report_grid = {t};
        const auto sp = simulate(cfg, system);
        const auto& tab = sp.martingales;
        Row row;
        row.m = {tab.m_arrival[0] / sn, tab.m_abandon[0] / sn, tab.m_service[0] / sn};
        row.qv = {tab.qv_arrival[0] / rn, tab.qv_abandon[0] / rn, tab.qv_service[0] / rn};
        for (std::size_t i = 0; i < 3; ++i) row.jump[i] = tab.max_jump[i] / sn;
        row.counts = sp.counts;
        return row;
      },
      ctx.threads());

  std::ostringstream out;
  out << "replication,m_arrival,m_abandon,m_service,qv_arrival,qv_abandon,qv_service\n";
  std::array<std::vector<double>, 3> m, qv;
  double jump_dev = 0.0, jump_max = 0.0;
  std::array<std::int64_t, 3> total_events{0, 0, 0};
  for (std::size_t r = 0; r < reps; ++r) {
    const auto& row = rows[r];
    csv::row(out, r, row.m[0], row.m[1], row.m[2], row.qv[0], row.qv[1], row.qv[2]);
    for (std::size_t i = 0; i < 3; ++i) {
      m[i].push_back(row.m[i]);
      qv[i].push_back(row.qv[i]);
      total_events[i] += row.counts[i];
      if (row.counts[i] > 0) {
        jump_dev = std::max(jump_dev, std::abs(row.jump[i] - 1.0 / sn));
        jump_max = std::max(jump_max, row.jump[i]);
      }
    }
  }
  ctx.write("martingales.csv", out.str());

  const char* label[3] = {"A", "R", "B"};
  for (std::size_t i = 0; i < 3; ++i) {
    if (total_events[i] == 0)
      throw ConfigError(ctx.name() + ": no " + label[i] + " events; choose rates that exercise every component");
    const auto mo = moments(EmpiricalSample(m[i]));
    const double comp = moments(EmpiricalSample(qv[i])).mean;
    ctx.verdict(std::string("mean_z[") + label[i] + "]", std::abs(mo.mean) / mo.se_mean, "<=",
                ctx.tolerance("mean_z", 4.0), "mean=" + fmt(mo.mean));
    ctx.verdict(std::string("variance_relative_error[") + label[i] + "]", std::abs(mo.variance - comp) / comp, "<=",
                ctx.tolerance("variance_relative_error", 0.05),
                "variance=" + fmt(mo.variance) + " compensator=" + fmt(comp));
  }
  const std::pair<std::size_t, std::size_t> pairs[3] = {{0, 1}, {0, 2}, {1, 2}};
  for (auto [a, b] : pairs) {
    const auto c = covariance(m[a], m[b]);
    ctx.verdict(std::string("covariance_z[") + label[a] + label[b] + "]", std::abs(c.covariance) / c.se, "<=",
                ctx.tolerance("covariance_z", 4.0), "covariance=" + fmt(c.covariance));
  }
  ctx.verdict("max_jump_deviation", jump_dev, "<=", ctx.tolerance("max_jump_deviation", 0.0),
              "max_jump=" + fmt(jump_max) + " 1/sqrt(n)=" + fmt(1.0 / sn));
}

/// Time-average occupancy of constant-rate systems against the exact
/// birth-death stationary law.
inline void bd_oracle(CheckContext& ctx) {
  const auto& p = ctx.params();
  if (!p.contains("systems") || !p["systems"].is_array() || p["systems"].empty())
    throw ConfigError(ctx.name() + ".systems: expected a nonempty list");
  const double horizon = ctx.positive("horizon", 5000.0);
  const std::uint64_t seed = ctx.seed();
  const double tv_tol = ctx.tolerance("tv", 0.02);
  const auto& systems = p["systems"];
  for (std::size_t i = 0; i < systems.size(); ++i) {
    const auto& s = systems[i];
    const std::string what = ctx.name() + ".systems[" + std::to_string(i) + "]";
    if (!s.is_object() || !s.contains("model")) throw ConfigError(what + ": expected {label, n, model}");
    const std::string label = s.value("label", "system" + std::to_string(i));
    const Model model = parse_model(s["model"], what + ".model");
    if (!model.has_constant_rates()) throw ConfigError(what + ": needs constant rates");
    const std::int64_t n = detail::integer_field(s, "n", 1, 1, what);
    SimConfig cfg;
    cfg.model = model;
    cfg.n = n;
    cfg.horizon = horizon;
    cfg.seed = seed;
    cfg.stream = i;
    const auto sp = simulate(cfg);
    const auto pi = bd_stationary(BDChain::erlang_a(sp.system->lambda.value(0.0), model.mu.value(0.0),
                                                    model.theta.value(0.0), sp.system->servers.value(0.0)));
    const std::size_t size = pi.size() + 1;  // last entry lumps everything beyond the oracle's support
    const auto occ = occupancy_distribution(sp, size - 1);
    auto oracle = pi;
    oracle.resize(size, 0.0);
    std::ostringstream out;
    out << "state,empirical,oracle\n";
    for (std::size_t j = 0; j < size; ++j) csv::row(out, j, occ[j], oracle[j]);
    ctx.write("occupancy_" + label + ".csv", out.str());
    ctx.verdict("tv[" + label + "]", tv_distance(occ, oracle), "<=", tv_tol,
                "lambda_n=" + fmt(sp.system->lambda.value(0.0)) + " K=" + std::to_string(sp.system->servers.value(0.0)));
  }
}

/// Fluid residuals on config files, closed-form normalizer against
/// quadrature, and weak consistency of Euler-Maruyama under dt -> dt/4.
inline void solver_consistency(CheckContext& ctx) {
  const auto& p = ctx.params();
  std::ostringstream out;
  out << "item,value\n";

  double worst_residual = 0.0;
  std::string worst_config;
  if (p.contains("configs")) {
    if (!p["configs"].is_array()) throw ConfigError(ctx.name() + ".configs: expected a list of paths");
    for (const auto& c : p["configs"]) {
      if (!c.is_string()) throw ConfigError(ctx.name() + ".configs: expected a list of paths");
      const auto rc = load_run_config(ctx.resolve(c.get<std::string>()));
      const auto fp = solve_fluid(rc.model.fluid_inputs(), rc.horizon, {.tol = rc.tol, .grid_step = rc.grid_step});
      const double res = fp.residual();
      csv::row(out, "residual:" + c.get<std::string>(), res);
      if (res >= worst_residual) {
        worst_residual = res;
        worst_config = c.get<std::string>();
      }
    }
    ctx.verdict("fluid_residual_max", worst_residual, "<=", ctx.tolerance("fluid_residual", 1e-8),
                "worst=" + worst_config);
  }

  std::vector<std::array<double, 3>> cases{{0, 1, 1}, {0, 1, 4}, {1, 1, 1}, {0, 1, 2}, {-1, 1, 0.5}, {0.5, 2, 3}};
  if (p.contains("qed_cases")) {
    cases.clear();
    for (const auto& c : p["qed_cases"]) {
      const auto v = detail::number_list(c, ctx.name() + ".qed_cases");
      if (v.size() != 3) throw ConfigError(ctx.name() + ".qed_cases: each entry is [alpha, mu, theta]");
      cases.push_back({v[0], v[1], v[2]});
    }
  }
  double worst_c = 0.0;
  for (const auto& [alpha, mu, theta] : cases) {
    const double a = alpha / mu, r = theta / mu;
    const double inf = std::numeric_limits<double>::infinity();
    const double z = quad::adaptive([&](double x) { return std::exp(a * x - x * x / 2.0); }, -inf, 0.0, 1e-14) +
                     quad::adaptive([&](double x) { return std::exp(a * x - r * x * x / 2.0); }, 0.0, inf, 1e-14);
    const double c = qed_normalizer(alpha, mu, theta);
    const double err = std::abs(c - 1.0 / z) * z;
    csv::row(out, "qed_normalizer:" + fmt(alpha) + "/" + fmt(mu) + "/" + fmt(theta), c);
    worst_c = std::max(worst_c, err);
  }
  ctx.verdict("qed_normalizer_relative_error", worst_c, "<=", ctx.tolerance("qed_normalizer", 1e-10));

  if (p.contains("em")) {
    const auto& em = p["em"];
    const std::string what = ctx.name() + ".em";
    if (!em.is_object() || !em.contains("model")) throw ConfigError(what + ": expected {model, ...}");
    const Model m = parse_model(em["model"], what + ".model");
    const double dt = detail::positive_field(em, "dt", 0.02, what);
    const double horizon = detail::positive_field(em, "horizon", 2.0, what);
    const double x0 = detail::number_field(em, "x0", m.scheme.x0, what);
    const auto paths = static_cast<std::size_t>(detail::integer_field(em, "paths", 10000, 2, what));
    const std::uint64_t seed = detail::seed_field(em, "seed", ctx.seed(), what);
    const auto fp = solve_fluid(m.fluid_inputs(), horizon);
    const DiffusionSolver coarse(m, fp, dt, horizon), fine(m, fp, dt / 4.0, horizon);
    const auto a = run_replications(paths, [&](std::size_t r) { return coarse.terminal(x0, seed, r); }, ctx.threads());
    const auto b = run_replications(paths, [&](std::size_t r) { return fine.terminal(x0, seed, r); }, ctx.threads());
    const auto ma = moments(EmpiricalSample(a)), mb = moments(EmpiricalSample(b));
    const double band = 4.0 * std::hypot(ma.se_mean, mb.se_mean) + dt;
    csv::row(out, "em_mean_dt", ma.mean);
    csv::row(out, "em_mean_dt_over_4", mb.mean);
    ctx.verdict("em_mean_gap_over_band", std::abs(ma.mean - mb.mean) / band, "<=", ctx.tolerance("em_band", 1.0),
                "gap=" + fmt(std::abs(ma.mean - mb.mean)) + " band=4se+dt=" + fmt(band));
  }
  ctx.write("consistency.csv", out.str());
}

}  // namespace checks

inline const std::map<std::string, CheckFn>& check_registry() {
  static const std::map<std::string, CheckFn> registry{
      {"identity", checks::identity},
      {"fluid_lln", checks::fluid_lln},
      {"fluid_tracking", checks::fluid_lln},
      {"diffusion_clt", [](CheckContext& c) { checks::diffusion_clt(c, false); }},
      {"qed_stationary", [](CheckContext& c) { checks::diffusion_clt(c, true); }},
      {"critical_sensitivity", checks::critical_sensitivity},
      {"martingale_structure", checks::martingale_structure},
      {"bd_oracle", checks::bd_oracle},
      {"solver_consistency", checks::solver_consistency},
  };
  return registry;
}

struct ExperimentResult {
  std::string name;
  std::vector<Verdict> verdicts;
  bool all_pass() const {
    return !verdicts.empty() && std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
  }
};

inline json verdicts_to_json(const ExperimentResult& res) {
  json rows = json::array();
  for (const auto& v : res.verdicts)
    rows.push_back({{"check", v.check},
                    {"statistic", v.statistic},
                    {"value", v.value},
                    {"relation", v.relation},
                    {"tolerance", v.tolerance},
                    {"result", v.pass ? "PASS" : "FAIL"},
                    {"detail", v.detail}});
  return {{"experiment", res.name}, {"all_pass", res.all_pass()}, {"verdicts", rows}};
}

inline void write_verdicts_csv(std::ostream& os, const ExperimentResult& res) {
  os << "check,statistic,value,relation,tolerance,result\n";
  for (const auto& v : res.verdicts) csv::row(os, v.check, v.statistic, v.value, v.relation, v.tolerance, v.pass ? "PASS" : "FAIL");
}

/// Runs every check of an experiment. All check names are resolved before
/// anything runs, so an unknown name fails fast with ConfigError.
inline ExperimentResult run_experiment(const json& experiment, const std::filesystem::path& base_dir,
                                       const std::filesystem::path& out_dir, unsigned threads = 0) {
  if (!experiment.is_object() || !experiment.contains("checks") || !experiment["checks"].is_array())
    throw ConfigError("experiment: expected an object with a \"checks\" list");
  ExperimentResult res;
  res.name = experiment.value("name", std::string("experiment"));
  const std::uint64_t seed = detail::seed_field(experiment, "seed", 1, "experiment");
  const auto& registry = check_registry();

  struct Entry {
    std::string name;
    CheckFn fn;
    json params;
  };
  std::vector<Entry> entries;
  std::set<std::string> names;
  for (const auto& c : experiment["checks"]) {
    std::string check, name;
    json params = json::object();
    if (c.is_string()) {
      check = name = c.get<std::string>();
    } else if (c.is_object() && c.contains("check") && c["check"].is_string()) {
      check = c["check"].get<std::string>();
      name = c.value("name", check);
      params = c;
    } else {
      throw ConfigError("experiment.checks: each entry is a check name or {\"check\": ..., ...}");
    }
    const auto it = registry.find(check);
    if (it == registry.end()) throw ConfigError("experiment: unknown check \"" + check + "\"");
    if (!names.insert(name).second) throw ConfigError("experiment: duplicate check name \"" + name + "\"");
    entries.push_back({name, it->second, params});
  }
  if (entries.empty()) throw ConfigError("experiment: no checks");

  for (auto& e : entries) {
    CheckContext ctx(e.name, e.params, base_dir, out_dir, seed, threads);
    try {
      e.fn(ctx);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(e.name + ": " + ex.what());
    }
    for (auto& v : ctx.take()) res.verdicts.push_back(std::move(v));
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream csv_out(out_dir / "verdicts.csv", std::ios::binary);
    write_verdicts_csv(csv_out, res);
    std::ofstream json_out(out_dir / "verdicts.json", std::ios::binary);
    json_out << verdicts_to_json(res).dump(2) << "\n";
  }
  return res;
}

}  // namespace mtq
