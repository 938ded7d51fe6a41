#pragma once

// Exact event-driven simulation of the n-th queue by thinning, with the
// martingale decomposition of the counting processes and the fluid- and
// diffusion-scaled processes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "mtq/csv.hpp"
#include "mtq/fluid.hpp"
#include "mtq/model.hpp"
#include "mtq/rates.hpp"
#include "mtq/rng.hpp"

namespace mtq {

enum class EventType : std::uint8_t { arrival = 0, abandonment = 1, service = 2 };

inline std::string_view to_string(EventType e) {
  switch (e) {
    case EventType::arrival: return "arrival";
    case EventType::abandonment: return "abandonment";
    case EventType::service: return "service";
  }
  return "unknown";
}

struct RecordFlags {
  bool path = true;
  bool martingales = false;
  bool quadratic_variations = false;
  bool scaled = false;
};

struct SimConfig {
  Model model;
  std::int64_t n = 1;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  RecordFlags record;
  std::vector<double> report_grid;      // for martingale and scaled columns
  const FluidPath* fluid = nullptr;     // required when record.scaled is set
  double window = 1.0;                  // thinning lookahead
};

/// Martingales of the arrival (A), abandonment (R) and service (B) counts
/// together with their compensators, on a reporting grid.
struct MartingaleTable {
  std::vector<double> t;
  std::vector<double> m_arrival, m_abandon, m_service;
  std::vector<double> qv_arrival, qv_abandon, qv_service;
  std::array<double, 3> max_jump{0.0, 0.0, 0.0};  // largest |dM| per component over the path
};

struct SamplePath {
  std::int64_t n = 1;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::int64_t q0 = 0;
  std::int64_t q_final = 0;
  std::array<std::int64_t, 3> counts{0, 0, 0};  // per EventType

  // Event log (recorded when RecordFlags::path is set).
  std::vector<double> times;
  std::vector<std::int64_t> q;  // population right after each event
  std::vector<EventType> types;

  std::shared_ptr<const Prelimit> system;
  RateFunction mu, theta;

  MartingaleTable martingales;  // filled when martingales/quadratic_variations are recorded
  std::vector<double> fluid_scaled, diffusion_scaled;

  /// Right-continuous population at time t (needs the event log).
  std::int64_t at(double t) const {
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return q0;
    return q[static_cast<std::size_t>(it - times.begin()) - 1];
  }
};

namespace detail {

inline void check_grid(const std::vector<double>& grid, double horizon, const char* what) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0 || grid[i] > horizon) {
      std::ostringstream os;
      os.precision(17);
      os << what << ": grid time " << grid[i] << " outside [0, " << horizon << "]";
      throw std::invalid_argument(os.str());
    }
    if (i > 0 && grid[i] < grid[i - 1]) throw std::invalid_argument(std::string(what) + ": grid must be sorted");
  }
}

}  // namespace detail

/// Compensated counting processes on a grid, swept over events and server
/// changes so each compensator increment is an exact rate integral with Q and
/// K held constant.
inline MartingaleTable martingale_report(const SamplePath& sp, const std::vector<double>& grid) {
  if (!sp.system) throw std::invalid_argument("martingale_report: sample path has no system data");
  detail::check_grid(grid, sp.horizon, "martingale_report");
  const Prelimit& sys = *sp.system;
  const auto& k_starts = sys.servers.starts();

  MartingaleTable out;
  out.t = grid;
  for (auto* v : {&out.m_arrival, &out.m_abandon, &out.m_service, &out.qv_arrival, &out.qv_abandon, &out.qv_service})
    v->reserve(grid.size());

  double cur = 0.0;
  std::int64_t q = sp.q0;
  std::size_t ie = 0, ik = 1, ig = 0;
  std::array<double, 3> count{0.0, 0.0, 0.0};
  std::array<double, 3> comp{0.0, 0.0, 0.0};
  const double inf = std::numeric_limits<double>::infinity();

  auto advance = [&](double to) {
    if (to <= cur) return;
    const std::int64_t k = sys.servers.value(cur);
    comp[0] += sys.lambda.integral(cur, to);
    const auto excess = static_cast<double>(std::max<std::int64_t>(q - k, 0));
    const auto busy = static_cast<double>(std::min(q, k));
    if (excess > 0.0) comp[1] += excess * sp.theta.integral(cur, to);
    if (busy > 0.0) comp[2] += busy * sp.mu.integral(cur, to);
    cur = to;
  };

  while (true) {
    const double te = ie < sp.times.size() ? sp.times[ie] : inf;
    const double tk = ik < k_starts.size() ? k_starts[ik] : inf;
    const double tg = ig < grid.size() ? grid[ig] : inf;
    if (te == inf && tg == inf) break;
    if (te <= tg && te <= tk) {
      advance(te);
      const auto type = static_cast<std::size_t>(sp.types[ie]);
      // dM = dN - dC; the compensator is continuous, so dC = 0 at the event.
      // Evaluated term by term so rounding in N - C does not leak into the jump.
      const double count_before = count[type], comp_before = comp[type];
      count[type] += 1.0;
      const double jump = (count[type] - count_before) - (comp[type] - comp_before);
      out.max_jump[type] = std::max(out.max_jump[type], std::abs(jump));
      q = sp.q[ie];
      ++ie;
    } else if (tk < tg) {
      advance(tk);
      ++ik;
    } else {
      advance(tg);
      out.m_arrival.push_back(count[0] - comp[0]);
      out.m_abandon.push_back(count[1] - comp[1]);
      out.m_service.push_back(count[2] - comp[2]);
      out.qv_arrival.push_back(comp[0]);
      out.qv_abandon.push_back(comp[1]);
      out.qv_service.push_back(comp[2]);
      ++ig;
    }
  }
  return out;
}

struct ScaledPaths {
  std::vector<double> fluid_scaled;      // Q^n_t / n
  std::vector<double> diffusion_scaled;  // sqrt(n) (Q^n_t / n - q_t)
};

inline ScaledPaths scaled_paths(const SamplePath& sp, const FluidPath& fp, std::int64_t n,
                                const std::vector<double>& grid) {
  detail::check_grid(grid, std::min(sp.horizon, fp.horizon()), "scaled_paths");
  const double rn = static_cast<double>(n), sn = std::sqrt(rn);
  ScaledPaths out;
  out.fluid_scaled.reserve(grid.size());
  out.diffusion_scaled.reserve(grid.size());
  std::size_t ie = 0;
  std::int64_t q = sp.q0;
  for (double t : grid) {
    while (ie < sp.times.size() && sp.times[ie] <= t) q = sp.q[ie++];
    const double f = static_cast<double>(q) / rn;
    out.fluid_scaled.push_back(f);
    out.diffusion_scaled.push_back(sn * (f - fp.at(t)));
  }
  return out;
}

/// Simulates one path of the n-th system on [0, horizon].
///
/// Between events the total intensity is lambda^n_t + theta_t (Q - K)^+ +
/// mu_t (Q ^ K). Candidates come from a homogeneous Poisson stream at the
/// window supremum of that intensity; a single uniform on [0, bound) both
/// accepts and classifies them (arrival, abandonment, service, reject). The
/// bound is refreshed after every accepted event, server change and window end.
inline SamplePath simulate(const SimConfig& cfg, std::shared_ptr<const Prelimit> system) {
  if (!(cfg.horizon > 0.0)) throw std::invalid_argument("simulate: horizon must be > 0");
  if (cfg.n < 1) throw std::invalid_argument("simulate: n must be >= 1");
  if (!system || system->n != cfg.n || system->horizon < cfg.horizon)
    throw std::invalid_argument("simulate: prelimit data does not match the configuration");
  if (cfg.record.scaled && !cfg.fluid) throw std::invalid_argument("simulate: scaled output needs a fluid path");
  if ((cfg.record.martingales || cfg.record.quadratic_variations || cfg.record.scaled) && !cfg.record.path)
    throw std::invalid_argument("simulate: derived outputs need the event log (record.path)");

  const Prelimit& sys = *system;
  const RateFunction& lam = sys.lambda;
  const RateFunction& mu = cfg.model.mu;
  const RateFunction& theta = cfg.model.theta;

  SamplePath sp;
  sp.n = cfg.n;
  sp.horizon = cfg.horizon;
  sp.seed = cfg.seed;
  sp.stream = cfg.stream;
  sp.q0 = sys.q0;
  sp.system = system;
  sp.mu = mu;
  sp.theta = theta;

  Rng rng(cfg.seed, cfg.stream);
  double t = 0.0;
  std::int64_t q = sys.q0;
  const double horizon = cfg.horizon;

  while (t < horizon) {
    const double window_end = std::min({t + cfg.window, sys.servers.next_change_after(t), horizon});
    const std::int64_t k = sys.servers.value(t);
    const auto excess = static_cast<double>(std::max<std::int64_t>(q - k, 0));
    const auto busy = static_cast<double>(std::min(q, k));
    const double bound = lam.sup_on(t, window_end) + (excess > 0.0 ? excess * theta.sup_on(t, window_end) : 0.0) +
                         (busy > 0.0 ? busy * mu.sup_on(t, window_end) : 0.0);
    if (!(bound > 0.0)) throw std::logic_error("simulate: thinning bound vanished with a positive arrival rate");

    bool accepted = false;
    while (true) {
      const double cand = t + rng.exponential() / bound;
      if (cand >= window_end) {
        t = window_end;
        break;
      }
      t = cand;
      const double u = rng.uniform() * bound;
      const double a = lam.value(t);
      if (u < a) {
        ++q;
        sp.counts[0]++;
        if (cfg.record.path) sp.types.push_back(EventType::arrival);
        accepted = true;
      } else {
        const double ab = excess > 0.0 ? excess * theta.value(t) : 0.0;
        if (u < a + ab) {
          --q;
          sp.counts[1]++;
          if (cfg.record.path) sp.types.push_back(EventType::abandonment);
          accepted = true;
        } else if (busy > 0.0 && u < a + ab + busy * mu.value(t)) {
          --q;
          sp.counts[2]++;
          if (cfg.record.path) sp.types.push_back(EventType::service);
          accepted = true;
        }
      }
      if (accepted) {
        if (cfg.record.path) {
          sp.times.push_back(t);
          sp.q.push_back(q);
        }
        break;
      }
    }
  }
  sp.q_final = q;

  if (cfg.record.martingales || cfg.record.quadratic_variations) sp.martingales = martingale_report(sp, cfg.report_grid);
  if (cfg.record.scaled) {
    auto scaled = scaled_paths(sp, *cfg.fluid, cfg.n, cfg.report_grid);
    sp.fluid_scaled = std::move(scaled.fluid_scaled);
    sp.diffusion_scaled = std::move(scaled.diffusion_scaled);
  }
  return sp;
}

inline SamplePath simulate(const SimConfig& cfg) {
  return simulate(cfg, std::make_shared<const Prelimit>(prelimit(cfg.model.scheme, cfg.n, cfg.horizon)));
}

/// Fraction of [0, horizon] spent in each population level 0..max_state;
/// levels above max_state are lumped into the last entry.
inline std::vector<double> occupancy_distribution(const SamplePath& sp, std::size_t max_state) {
  std::vector<double> occ(max_state + 1, 0.0);
  double prev = 0.0;
  std::int64_t q = sp.q0;
  auto add = [&](double until) {
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(q), max_state);
    occ[idx] += until - prev;
    prev = until;
  };
  for (std::size_t i = 0; i < sp.times.size(); ++i) {
    add(sp.times[i]);
    q = sp.q[i];
  }
  add(sp.horizon);
  for (auto& x : occ) x /= sp.horizon;
  return occ;
}

inline void write_path_csv(std::ostream& os, const SamplePath& sp) {
  os << "t,event_type,Q\n";
  csv::row(os, 0.0, "initial", sp.q0);
  for (std::size_t i = 0; i < sp.times.size(); ++i) csv::row(os, sp.times[i], to_string(sp.types[i]), sp.q[i]);
}

}  // namespace mtq
