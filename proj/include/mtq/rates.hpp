#pragma once

// Time-varying rate and capacity functions, and the n-indexed prelimit data
// built from limit data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mtq {

enum class RateKind { constant, piecewise_constant, piecewise_linear, sinusoidal, sum };

inline std::string_view to_string(RateKind kind) {
  switch (kind) {
    case RateKind::constant: return "constant";
    case RateKind::piecewise_constant: return "piecewise-constant";
    case RateKind::piecewise_linear: return "piecewise-linear";
    case RateKind::sinusoidal: return "sinusoidal";
    case RateKind::sum: return "sum";
  }
  return "unknown";
}

inline RateKind rate_kind_from_string(std::string_view name) {
  if (name == "constant") return RateKind::constant;
  if (name == "piecewise-constant") return RateKind::piecewise_constant;
  if (name == "piecewise-linear") return RateKind::piecewise_linear;
  if (name == "sinusoidal") return RateKind::sinusoidal;
  if (name == "sum" || name == "sum-of-primitives") return RateKind::sum;
  throw std::invalid_argument("unknown rate function kind '" + std::string(name) + "'");
}

namespace detail {

// max of sin(x) over [lo, hi], lo <= hi.
inline double max_sin_on(double lo, double hi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double first_peak = std::numbers::pi / 2.0 + two_pi * std::ceil((lo - std::numbers::pi / 2.0) / two_pi);
  if (first_peak <= hi) return 1.0;
  return std::max(std::sin(lo), std::sin(hi));
}

inline double min_sin_on(double lo, double hi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double first_trough = -std::numbers::pi / 2.0 + two_pi * std::ceil((lo + std::numbers::pi / 2.0) / two_pi);
  if (first_trough <= hi) return -1.0;
  return std::min(std::sin(lo), std::sin(hi));
}

inline void check_interval(double s, double t, const char* what) {
  if (!(s <= t)) {
    std::ostringstream os;
    os << what << ": reversed interval [" << s << ", " << t << "]";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace detail

/// A function of time drawn from a closed algebra of primitives.
///
/// Kinds and parameter layout:
///   constant            params = {c}
///   piecewise-constant  breakpoints = {0 = b0 < b1 < ...}, params = {v0, v1, ...};
///                       value v_i on [b_i, b_{i+1}), the last value extends to infinity
///   piecewise-linear    breakpoints = knot times (increasing), params = knot values;
///                       linear between knots, held constant outside them
///   sinusoidal          params = {a, b, omega, phase}: a + b sin(omega t + phase)
///   sum                 terms = list of functions, summed pointwise
///
/// Integrals are closed form. sup_on/inf_on are exact for every primitive
/// kind and a valid (possibly loose) bound for sums. Functions flagged as
/// unsigned are rates and must be strictly positive for all t >= 0.
class RateFunction {
 public:
  RateFunction() : RateFunction(constant(1.0)) {}

  static RateFunction constant(double c, bool is_signed = false) {
    return RateFunction(RateKind::constant, {c}, {}, {}, is_signed);
  }

  static RateFunction piecewise_constant(std::vector<double> breakpoints, std::vector<double> values,
                                         bool is_signed = false) {
    return RateFunction(RateKind::piecewise_constant, std::move(values), std::move(breakpoints), {},
                        is_signed);
  }

  static RateFunction piecewise_linear(std::vector<double> knots, std::vector<double> values,
                                       bool is_signed = false) {
    return RateFunction(RateKind::piecewise_linear, std::move(values), std::move(knots), {}, is_signed);
  }

  static RateFunction sinusoidal(double a, double b, double omega, double phase, bool is_signed = false) {
    return RateFunction(RateKind::sinusoidal, {a, b, omega, phase}, {}, {}, is_signed);
  }

  static RateFunction sum(std::vector<RateFunction> terms, bool is_signed = false) {
    return RateFunction(RateKind::sum, {}, {}, std::move(terms), is_signed);
  }

  RateKind kind() const noexcept { return kind_; }
  const std::vector<double>& params() const noexcept { return params_; }
  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  const std::vector<RateFunction>& terms() const noexcept { return terms_; }
  bool is_signed() const noexcept { return signed_; }

  /// True when the function does not depend on time.
  bool is_constant() const {
    switch (kind_) {
      case RateKind::constant: return true;
      case RateKind::piecewise_constant:
      case RateKind::piecewise_linear:
        return std::all_of(params_.begin(), params_.end(), [&](double v) { return v == params_.front(); });
      case RateKind::sinusoidal: return params_[1] == 0.0 || params_[2] == 0.0;
      case RateKind::sum:
        return std::all_of(terms_.begin(), terms_.end(), [](const RateFunction& f) { return f.is_constant(); });
    }
    return false;
  }

  double value(double t) const {
    switch (kind_) {
      case RateKind::constant: return params_[0];
      case RateKind::piecewise_constant: return params_[segment_index(t)];
      case RateKind::piecewise_linear: return linear_value(t);
      case RateKind::sinusoidal: return params_[0] + params_[1] * std::sin(params_[2] * t + params_[3]);
      case RateKind::sum: {
        double v = 0.0;
        for (const auto& f : terms_) v += f.value(t);
        return v;
      }
    }
    return 0.0;
  }

  /// Integral over [s, t].
  double integral(double s, double t) const {
    detail::check_interval(s, t, "integral");
    switch (kind_) {
      case RateKind::constant: return params_[0] * (t - s);
      case RateKind::piecewise_constant: return piecewise_constant_integral(s, t);
      case RateKind::piecewise_linear: return piecewise_linear_integral(s, t);
      case RateKind::sinusoidal: {
        const double a = params_[0], b = params_[1], w = params_[2], ph = params_[3];
        if (w == 0.0) return (a + b * std::sin(ph)) * (t - s);
        return a * (t - s) - (b / w) * (std::cos(w * t + ph) - std::cos(w * s + ph));
      }
      case RateKind::sum: {
        double v = 0.0;
        for (const auto& f : terms_) v += f.integral(s, t);
        return v;
      }
    }
    return 0.0;
  }

  /// Upper bound of the function on [s, t]; exact for primitive kinds.
  double sup_on(double s, double t) const {
    detail::check_interval(s, t, "sup_on");
    switch (kind_) {
      case RateKind::constant: return params_[0];
      case RateKind::piecewise_constant: {
        const std::size_t i0 = segment_index(s), i1 = segment_index(t);
        return *std::max_element(params_.begin() + static_cast<std::ptrdiff_t>(i0),
                                 params_.begin() + static_cast<std::ptrdiff_t>(i1) + 1);
      }
      case RateKind::piecewise_linear: {
        double m = std::max(linear_value(s), linear_value(t));
        for (std::size_t i = 0; i < breakpoints_.size(); ++i)
          if (breakpoints_[i] > s && breakpoints_[i] < t) m = std::max(m, params_[i]);
        return m;
      }
      case RateKind::sinusoidal: {
        const double a = params_[0], b = params_[1];
        if (b == 0.0) return a;
        const auto [lo, hi] = phase_range(s, t);
        return b > 0.0 ? a + b * detail::max_sin_on(lo, hi) : a + b * detail::min_sin_on(lo, hi);
      }
      case RateKind::sum: {
        double v = 0.0;
        for (const auto& f : terms_) v += f.sup_on(s, t);
        return v;
      }
    }
    return 0.0;
  }

  /// Lower bound of the function on [s, t]; exact for primitive kinds.
  double inf_on(double s, double t) const {
    detail::check_interval(s, t, "inf_on");
    switch (kind_) {
      case RateKind::constant: return params_[0];
      case RateKind::piecewise_constant: {
        const std::size_t i0 = segment_index(s), i1 = segment_index(t);
        return *std::min_element(params_.begin() + static_cast<std::ptrdiff_t>(i0),
                                 params_.begin() + static_cast<std::ptrdiff_t>(i1) + 1);
      }
      case RateKind::piecewise_linear: {
        double m = std::min(linear_value(s), linear_value(t));
        for (std::size_t i = 0; i < breakpoints_.size(); ++i)
          if (breakpoints_[i] > s && breakpoints_[i] < t) m = std::min(m, params_[i]);
        return m;
      }
      case RateKind::sinusoidal: {
        const double a = params_[0], b = params_[1];
        if (b == 0.0) return a;
        const auto [lo, hi] = phase_range(s, t);
        return b > 0.0 ? a + b * detail::min_sin_on(lo, hi) : a + b * detail::max_sin_on(lo, hi);
      }
      case RateKind::sum: {
        double v = 0.0;
        for (const auto& f : terms_) v += f.inf_on(s, t);
        return v;
      }
    }
    return 0.0;
  }

  /// Lower bound over all t >= 0.
  double global_inf() const {
    switch (kind_) {
      case RateKind::constant: return params_[0];
      case RateKind::piecewise_constant:
      case RateKind::piecewise_linear: return *std::min_element(params_.begin(), params_.end());
      case RateKind::sinusoidal:
        return (params_[2] == 0.0) ? params_[0] + params_[1] * std::sin(params_[3])
                                   : params_[0] - std::abs(params_[1]);
      case RateKind::sum: {
        double v = 0.0;
        for (const auto& f : terms_) v += f.global_inf();
        return v;
      }
    }
    return 0.0;
  }

  /// c * f, kept inside the primitive algebra.
  RateFunction scaled(double c, std::optional<bool> is_signed = std::nullopt) const {
    const bool sig = is_signed.value_or(signed_ || c < 0.0);
    switch (kind_) {
      case RateKind::constant: return constant(c * params_[0], sig);
      case RateKind::piecewise_constant:
      case RateKind::piecewise_linear: {
        std::vector<double> v = params_;
        for (auto& x : v) x *= c;
        return RateFunction(kind_, std::move(v), breakpoints_, {}, sig);
      }
      case RateKind::sinusoidal:
        return sinusoidal(c * params_[0], c * params_[1], params_[2], params_[3], sig);
      case RateKind::sum: {
        std::vector<RateFunction> t;
        t.reserve(terms_.size());
        for (const auto& f : terms_) t.push_back(f.scaled(c, true));
        return sum(std::move(t), sig);
      }
    }
    return *this;
  }

  /// Times in (s, t) where the function or its slope may jump.
  std::vector<double> breakpoints_in(double s, double t) const {
    std::vector<double> out;
    collect_breakpoints(s, t, out);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  RateFunction(RateKind kind, std::vector<double> params, std::vector<double> breakpoints,
               std::vector<RateFunction> terms, bool is_signed)
      : kind_(kind),
        params_(std::move(params)),
        breakpoints_(std::move(breakpoints)),
        terms_(std::move(terms)),
        signed_(is_signed) {
    validate();
  }

  void validate() const {
    for (double p : params_)
      if (!std::isfinite(p)) throw std::invalid_argument("rate function parameter is not finite");
    switch (kind_) {
      case RateKind::constant:
        if (params_.size() != 1) throw std::invalid_argument("constant: expected 1 parameter");
        break;
      case RateKind::piecewise_constant:
        if (breakpoints_.empty() || breakpoints_.size() != params_.size())
          throw std::invalid_argument("piecewise-constant: need one value per breakpoint");
        if (breakpoints_.front() != 0.0)
          throw std::invalid_argument("piecewise-constant: first breakpoint must be 0");
        break;
      case RateKind::piecewise_linear:
        if (breakpoints_.empty() || breakpoints_.size() != params_.size())
          throw std::invalid_argument("piecewise-linear: need one value per knot");
        break;
      case RateKind::sinusoidal:
        if (params_.size() != 4) throw std::invalid_argument("sinusoidal: expected {a, b, omega, phase}");
        break;
      case RateKind::sum:
        if (terms_.empty()) throw std::invalid_argument("sum: needs at least one term");
        break;
    }
    for (std::size_t i = 1; i < breakpoints_.size(); ++i)
      if (!(breakpoints_[i] > breakpoints_[i - 1]))
        throw std::invalid_argument(std::string(to_string(kind_)) + ": breakpoints must be increasing");
    if (!signed_ && !(global_inf() > 0.0))
      throw std::invalid_argument(std::string(to_string(kind_)) +
                                  ": rate function must be positive for all t >= 0 (flag it signed otherwise)");
  }

  std::size_t segment_index(double t) const {
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    if (it == breakpoints_.begin()) return 0;
    return static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
  }

  std::pair<double, double> phase_range(double s, double t) const {
    const double p1 = params_[2] * s + params_[3];
    const double p2 = params_[2] * t + params_[3];
    return {std::min(p1, p2), std::max(p1, p2)};
  }

  double linear_value(double t) const {
    if (t <= breakpoints_.front()) return params_.front();
    if (t >= breakpoints_.back()) return params_.back();
    const std::size_t i = segment_index(t);
    const double t0 = breakpoints_[i], t1 = breakpoints_[i + 1];
    const double w = (t - t0) / (t1 - t0);
    return params_[i] + w * (params_[i + 1] - params_[i]);
  }

  double piecewise_constant_integral(double s, double t) const {
    double total = 0.0;
    std::size_t i = segment_index(s);
    double a = s;
    while (a < t) {
      const double b = (i + 1 < breakpoints_.size()) ? std::min(t, breakpoints_[i + 1]) : t;
      total += params_[i] * (b - a);
      a = b;
      ++i;
    }
    return total;
  }

  double piecewise_linear_integral(double s, double t) const {
    // Split at knots; on each piece the function is affine so the trapezoid is exact.
    double total = 0.0;
    double a = s;
    for (double knot : breakpoints_) {
      if (knot <= a) continue;
      if (knot >= t) break;
      total += 0.5 * (linear_value(a) + linear_value(knot)) * (knot - a);
      a = knot;
    }
    total += 0.5 * (linear_value(a) + linear_value(t)) * (t - a);
    return total;
  }

  void collect_breakpoints(double s, double t, std::vector<double>& out) const {
    if (kind_ == RateKind::sum) {
      for (const auto& f : terms_) f.collect_breakpoints(s, t, out);
      return;
    }
    for (double b : breakpoints_)
      if (b > s && b < t) out.push_back(b);
  }

  RateKind kind_;
  std::vector<double> params_;
  std::vector<double> breakpoints_;
  std::vector<RateFunction> terms_;
  bool signed_ = false;
};

/// Right-continuous integer-valued step function on [0, infinity).
class StepFunction {
 public:
  StepFunction() = default;

  StepFunction(std::vector<double> starts, std::vector<std::int64_t> values)
      : starts_(std::move(starts)), values_(std::move(values)) {
    if (starts_.empty() || starts_.size() != values_.size() || starts_.front() != 0.0)
      throw std::invalid_argument("step function: need matching starts/values beginning at 0");
    for (std::size_t i = 1; i < starts_.size(); ++i)
      if (!(starts_[i] > starts_[i - 1])) throw std::invalid_argument("step function: starts must increase");
  }

  static StepFunction constant(std::int64_t v) { return StepFunction({0.0}, {v}); }

  std::size_t index(double t) const {
    const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
    return it == starts_.begin() ? 0 : static_cast<std::size_t>(it - starts_.begin()) - 1;
  }

  std::int64_t value(double t) const { return values_[index(t)]; }

  /// First jump time strictly after t, or +infinity.
  double next_change_after(double t) const {
    const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
    return it == starts_.end() ? std::numeric_limits<double>::infinity() : *it;
  }

  std::int64_t max_value() const { return *std::max_element(values_.begin(), values_.end()); }
  std::int64_t min_value() const { return *std::min_element(values_.begin(), values_.end()); }

  const std::vector<double>& starts() const noexcept { return starts_; }
  const std::vector<std::int64_t>& values() const noexcept { return values_; }

 private:
  std::vector<double> starts_{0.0};
  std::vector<std::int64_t> values_{1};
};

/// Limit data from which the n-indexed prelimit systems are built.
struct ScalingScheme {
  double q0 = 0.0;
  double x0 = 0.0;
  RateFunction lambda = RateFunction::constant(1.0);
  RateFunction alpha = RateFunction::constant(0.0, true);
  RateFunction k = RateFunction::constant(1.0);
  RateFunction gamma = RateFunction::constant(0.0, true);
};

/// The n-th system: arrival rate, server count and initial population.
struct Prelimit {
  std::int64_t n = 1;
  double horizon = 0.0;
  RateFunction lambda;  // n * lambda_t + sqrt(n) * alpha_t
  StepFunction servers;  // max(1, round(n * k_t + sqrt(n) * gamma_t))
  std::int64_t q0 = 0;   // max(0, round(n * q0 + sqrt(n) * x0))
};

namespace detail {

inline std::int64_t server_count(double level) {
  return std::max<std::int64_t>(1, std::llround(level));
}

// Appends (start, value) pieces of t -> server_count(g(t)) on [a, b).
inline void build_steps(const RateFunction& g, double a, double b, double resolution,
                        std::vector<double>& starts, std::vector<std::int64_t>& values) {
  const std::int64_t lo = server_count(g.inf_on(a, b));
  const std::int64_t hi = server_count(g.sup_on(a, b));
  auto push = [&](double t, std::int64_t v) {
    if (!values.empty() && values.back() == v) return;
    starts.push_back(t);
    values.push_back(v);
  };
  if (lo == hi) {
    push(a, lo);
    return;
  }
  if (b - a <= resolution) {
    push(a, server_count(g.value(a)));
    return;
  }
  const double mid = 0.5 * (a + b);
  build_steps(g, a, mid, resolution, starts, values);
  build_steps(g, mid, b, resolution, starts, values);
}

// Returns a time in [a, b] where f <= 0, if any, using the interval bounds.
inline std::optional<double> find_nonpositive(const RateFunction& f, double a, double b, double resolution) {
  if (f.inf_on(a, b) > 0.0) return std::nullopt;
  if (f.value(a) <= 0.0) return a;
  if (b - a <= resolution) return b;
  const double mid = 0.5 * (a + b);
  if (auto left = find_nonpositive(f, a, mid, resolution)) return left;
  return find_nonpositive(f, mid, b, resolution);
}

}  // namespace detail

/// Integer server schedule round(n k_t + sqrt(n) gamma_t), floored at 1, on [0, horizon].
/// Jump times are located to within a relative time resolution of 1e-12.
inline StepFunction server_schedule(const RateFunction& k, const RateFunction& gamma, std::int64_t n,
                                    double horizon) {
  const double rn = static_cast<double>(n);
  const RateFunction g = RateFunction::sum({k.scaled(rn, true), gamma.scaled(std::sqrt(rn), true)}, true);
  std::vector<double> cuts{0.0};
  for (double b : g.breakpoints_in(0.0, horizon)) cuts.push_back(b);
  for (double t = 1.0; t < horizon; t += 1.0) cuts.push_back(t);
  cuts.push_back(horizon);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<double> starts;
  std::vector<std::int64_t> values;
  const double resolution = 1e-12 * std::max(1.0, horizon);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    detail::build_steps(g, cuts[i], cuts[i + 1], resolution, starts, values);
  if (starts.empty()) {
    starts.push_back(0.0);
    values.push_back(detail::server_count(g.value(0.0)));
  }
  return StepFunction(std::move(starts), std::move(values));
}

/// Builds the n-th system on [0, horizon] from the limit data.
/// Throws if n * lambda_t + sqrt(n) * alpha_t is not positive on the horizon.
inline Prelimit prelimit(const ScalingScheme& sch, std::int64_t n, double horizon) {
  if (n < 1) throw std::invalid_argument("prelimit: n must be >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("prelimit: horizon must be > 0");
  const double rn = static_cast<double>(n);
  const double sn = std::sqrt(rn);

  Prelimit p;
  p.n = n;
  p.horizon = horizon;
  const bool alpha_vanishes = sch.alpha.is_constant() && sch.alpha.value(0.0) == 0.0;
  p.lambda = alpha_vanishes ? sch.lambda.scaled(rn, true)
                            : RateFunction::sum({sch.lambda.scaled(rn, true), sch.alpha.scaled(sn, true)}, true);
  if (auto bad = detail::find_nonpositive(p.lambda, 0.0, horizon, 1e-9 * std::max(1.0, horizon))) {
    std::ostringstream os;
    os.precision(17);
    os << "prelimit: arrival rate n*lambda + sqrt(n)*alpha is not positive at t = " << *bad << " (n = " << n
       << ")";
    throw std::invalid_argument(os.str());
  }
  p.servers = server_schedule(sch.k, sch.gamma, n, horizon);
  p.q0 = std::max<std::int64_t>(0, std::llround(rn * sch.q0 + sn * sch.x0));
  return p;
}

}  // namespace mtq
