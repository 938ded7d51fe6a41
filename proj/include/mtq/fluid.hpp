#pragma once

// Fluid limit: q_t = q_0 + int lambda - int theta (q - k)^+ - int mu (q ^ k),
// solved by an adaptive Dormand-Prince 5(4) integrator that stops exactly at
// crossings of q = k, where the drift has a kink.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "mtq/csv.hpp"
#include "mtq/quadrature.hpp"
#include "mtq/rates.hpp"

namespace mtq {

/// Position of the fluid level relative to the server level k_t.
enum class Side : int { below = -1, on = 0, above = 1 };

struct FluidInputs {
  double q0 = 0.0;
  RateFunction lambda = RateFunction::constant(1.0);
  RateFunction mu = RateFunction::constant(1.0);
  RateFunction theta = RateFunction::constant(1.0);
  RateFunction k = RateFunction::constant(1.0);
};

inline double fluid_drift(const FluidInputs& in, double t, double q) {
  const double k = in.k.value(t);
  return in.lambda.value(t) - in.theta.value(t) * std::max(q - k, 0.0) - in.mu.value(t) * std::min(q, k);
}

struct FluidOptions {
  double tol = 1e-8;
  /// Spacing of the uniform output grid merged into the adaptive nodes; 0 = nodes only.
  double grid_step = 0.0;
  double max_step = 0.1;
};

/// One accepted integrator step with its continuous extension.
struct FluidStep {
  double t0 = 0.0;
  double h = 0.0;
  std::array<double, 5> dense{};  // DOPRI5 interpolation coefficients
  Side side = Side::below;

  double at(double t) const {
    const double s = (t - t0) / h;
    const double s1 = 1.0 - s;
    return dense[0] + s * (dense[1] + s1 * (dense[2] + s * (dense[3] + s1 * dense[4])));
  }
};

class FluidPath {
 public:
  FluidPath(FluidInputs inputs, std::vector<FluidStep> steps, std::vector<double> grid)
      : inputs_(std::move(inputs)), steps_(std::move(steps)), grid_(std::move(grid)) {
    q_.reserve(grid_.size());
    for (double t : grid_) q_.push_back(at(t));
  }

  const FluidInputs& inputs() const noexcept { return inputs_; }
  const std::vector<FluidStep>& steps() const noexcept { return steps_; }
  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& q() const noexcept { return q_; }
  double horizon() const noexcept { return steps_.back().t0 + steps_.back().h; }

  /// Dense-output value of q at t in [0, horizon].
  double at(double t) const {
    if (t <= 0.0) return inputs_.q0;
    return steps_[step_index(t)].at(t);
  }

  /// Side of q_t relative to k_t. An exact tie on a step that was strictly on
  /// one side keeps that side; only paths that sit exactly on k report `on`.
  Side side_at(double t) const {
    const FluidStep& st = steps_[step_index(std::max(t, 0.0))];
    const double d = st.at(std::clamp(t, st.t0, st.t0 + st.h)) - inputs_.k.value(t);
    if (d > 0.0) return Side::above;
    if (d < 0.0) return Side::below;
    return st.side;
  }

  /// Largest |q_t - q_0 - int_0^t drift(s, q_s) ds| over the grid, with the
  /// integral taken by Gauss-Legendre quadrature of the dense solution.
  double residual() const {
    auto integrand = [&](double s) { return fluid_drift(inputs_, s, at(s)); };
    double worst = 0.0;
    double cumulative = 0.0;
    std::size_t g = 0;
    for (const auto& st : steps_) {
      const double t1 = st.t0 + st.h;
      while (g < grid_.size() && grid_[g] <= t1) {
        const double t = grid_[g];
        const double partial = t > st.t0 ? quad::gauss10(integrand, st.t0, t) : 0.0;
        worst = std::max(worst, std::abs(at(t) - inputs_.q0 - (cumulative + partial)));
        ++g;
      }
      cumulative += quad::gauss10(integrand, st.t0, t1);
      worst = std::max(worst, std::abs(st.at(t1) - inputs_.q0 - cumulative));
    }
    return worst;
  }

 private:
  std::size_t step_index(double t) const {
    const auto it = std::upper_bound(steps_.begin(), steps_.end(), t,
                                     [](double v, const FluidStep& s) { return v < s.t0; });
    if (it == steps_.begin()) return 0;
    return static_cast<std::size_t>(it - steps_.begin()) - 1;
  }

  FluidInputs inputs_;
  std::vector<FluidStep> steps_;
  std::vector<double> grid_;
  std::vector<double> q_;
};

namespace detail {

struct Dopri5 {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

struct TrialStep {
  double y1 = 0.0;
  double err = 0.0;
  double k7 = 0.0;  // drift at the new point (FSAL)
  std::array<double, 5> dense{};
};

template <typename F>
TrialStep dopri5_step(F&& f, double t, double y, double k1, double h) {
  using D = Dopri5;
  const double k2 = f(t + D::c2 * h, y + h * D::a21 * k1);
  const double k3 = f(t + D::c3 * h, y + h * (D::a31 * k1 + D::a32 * k2));
  const double k4 = f(t + D::c4 * h, y + h * (D::a41 * k1 + D::a42 * k2 + D::a43 * k3));
  const double k5 = f(t + D::c5 * h, y + h * (D::a51 * k1 + D::a52 * k2 + D::a53 * k3 + D::a54 * k4));
  const double k6 =
      f(t + h, y + h * (D::a61 * k1 + D::a62 * k2 + D::a63 * k3 + D::a64 * k4 + D::a65 * k5));
  TrialStep out;
  out.y1 = y + h * (D::b1 * k1 + D::b3 * k3 + D::b4 * k4 + D::b5 * k5 + D::b6 * k6);
  out.k7 = f(t + h, out.y1);
  out.err = h * (D::e1 * k1 + D::e3 * k3 + D::e4 * k4 + D::e5 * k5 + D::e6 * k6 + D::e7 * out.k7);
  const double ydiff = out.y1 - y;
  const double bspl = h * k1 - ydiff;
  out.dense = {y, ydiff, bspl, ydiff - h * out.k7 - bspl,
               h * (D::d1 * k1 + D::d3 * k3 + D::d4 * k4 + D::d5 * k5 + D::d6 * k6 + D::d7 * out.k7)};
  return out;
}

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace detail

/// Solves the fluid integral equation on [0, horizon].
inline FluidPath solve_fluid(const FluidInputs& in, double horizon, const FluidOptions& opt = {}) {
  if (!(horizon > 0.0)) throw std::invalid_argument("solve_fluid: horizon must be > 0");
  if (!(opt.tol > 0.0)) throw std::invalid_argument("solve_fluid: tol must be > 0");
  if (!(in.q0 >= 0.0)) throw std::invalid_argument("solve_fluid: q0 must be >= 0");

  auto f = [&](double t, double q) { return fluid_drift(in, t, q); };
  auto gap = [&](const std::array<double, 5>& dense, double t0, double h, double t) {
    FluidStep s{t0, h, dense, Side::below};
    return s.at(t) - in.k.value(t);
  };

  // Rate breakpoints become forced step boundaries.
  std::vector<double> stops;
  for (const RateFunction* r : {&in.lambda, &in.mu, &in.theta, &in.k})
    for (double b : r->breakpoints_in(0.0, horizon)) stops.push_back(b);
  stops.push_back(horizon);
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

  // Local error targets sit well below the requested tolerance so that the
  // accumulated integral-equation residual stays under it.
  const double atol = 1e-4 * opt.tol;
  const double rtol = 1e-4 * opt.tol;
  const double max_step = std::min(opt.max_step, horizon);

  std::vector<FluidStep> steps;
  double t = 0.0;
  double y = in.q0;
  double k1 = f(t, y);
  double h = std::min(max_step, 1e-3);
  std::size_t next_stop = 0;
  bool skip_event = false;
  const double h_min = 1e-14 * std::max(1.0, horizon);

  while (t < horizon) {
    while (stops[next_stop] <= t) ++next_stop;
    const double stop = stops[next_stop];
    bool hits_stop = false;
    if (t + h >= stop) {
      h = stop - t;
      hits_stop = true;
    }
    detail::TrialStep trial = detail::dopri5_step(f, t, y, k1, h);
    const double scale = atol + rtol * std::max(std::abs(y), std::abs(trial.y1));
    const double err = std::abs(trial.err) / scale;
    if (err > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      if (h < h_min) throw std::runtime_error("solve_fluid: step size underflow");
      continue;
    }

    // Event location: stop exactly where q - k changes sign.
    const int side0 = detail::sign_of(y - in.k.value(t));
    const int side1 = detail::sign_of(trial.y1 - in.k.value(t + h));
    if (!skip_event && side0 != 0 && side1 != 0 && side0 != side1) {
      double lo = t, hi = t + h;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, t); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (detail::sign_of(gap(trial.dense, t, h, mid)) == side0)
          lo = mid;
        else
          hi = mid;
      }
      const double h_event = hi - t;
      if (h_event > h_min && h_event < h) {
        h = h_event;
        trial = detail::dopri5_step(f, t, y, k1, h);
        hits_stop = false;
        skip_event = true;
      } else {
        skip_event = false;
      }
    } else {
      skip_event = false;
    }

    FluidStep st{t, h, trial.dense, Side::below};
    const double mid = t + 0.5 * h;
    const int s = detail::sign_of(st.at(mid) - in.k.value(mid));
    if (s != 0) {
      st.side = static_cast<Side>(s);
    } else if (!steps.empty()) {
      st.side = steps.back().side;
    } else {
      const int s0 = detail::sign_of(in.q0 - in.k.value(0.0));
      st.side = static_cast<Side>(s0);
    }
    steps.push_back(st);

    const double t_new = hits_stop ? stop : t + h;
    const double step_taken = h;
    t = t_new;
    y = trial.y1;
    k1 = trial.k7;
    if (hits_stop) {
      k1 = f(t, y);  // drift may jump at a rate breakpoint
    }
    const double grow = err > 0.0 ? std::min(5.0, 0.9 * std::pow(err, -0.2)) : 5.0;
    h = std::min(max_step, step_taken * grow);
    if (hits_stop && h < 1e-3 * max_step) h = std::min(max_step, 1e-3);
  }

  std::vector<double> grid;
  grid.reserve(steps.size() + 1);
  grid.push_back(0.0);
  for (const auto& st : steps) grid.push_back(st.t0 + st.h);
  if (opt.grid_step > 0.0) {
    const auto count = static_cast<std::int64_t>(std::floor(horizon / opt.grid_step + 1e-9));
    for (std::int64_t i = 0; i <= count; ++i) grid.push_back(std::min(horizon, static_cast<double>(i) * opt.grid_step));
    grid.push_back(horizon);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  }
  grid.back() = horizon;
  return FluidPath(in, std::move(steps), std::move(grid));
}

/// Long-run fluid level for constant rates with k = 1.
inline double fluid_equilibrium(double lambda, double mu, double theta) {
  if (!(lambda > 0.0 && mu > 0.0 && theta > 0.0))
    throw std::invalid_argument("fluid_equilibrium: rates must be positive");
  return lambda >= mu ? (lambda - mu) / theta + 1.0 : lambda / mu;
}

/// Long-run fluid level for constant rates and a constant server level k.
inline double fluid_equilibrium(double lambda, double mu, double theta, double k) {
  if (!(k > 0.0)) throw std::invalid_argument("fluid_equilibrium: k must be positive");
  if (!(lambda > 0.0 && mu > 0.0 && theta > 0.0))
    throw std::invalid_argument("fluid_equilibrium: rates must be positive");
  return lambda >= mu * k ? (lambda - mu * k) / theta + k : lambda / mu;
}

enum class Regime { under, over, critical_below, critical_above, critical_at };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::under: return "UNDER";
    case Regime::over: return "OVER";
    case Regime::critical_below: return "CRITICAL_BELOW";
    case Regime::critical_above: return "CRITICAL_ABOVE";
    case Regime::critical_at: return "CRITICAL_AT";
  }
  return "UNKNOWN";
}

inline Regime regime_classify(double lambda, double mu, double q0) {
  if (lambda < mu) return Regime::under;
  if (lambda > mu) return Regime::over;
  if (q0 < 1.0) return Regime::critical_below;
  if (q0 > 1.0) return Regime::critical_above;
  return Regime::critical_at;
}

inline void write_fluid_csv(std::ostream& os, const FluidPath& fp) {
  os << "t,q\n";
  for (std::size_t i = 0; i < fp.grid().size(); ++i) csv::row(os, fp.grid()[i], fp.q()[i]);
}

}  // namespace mtq
