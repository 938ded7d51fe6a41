#pragma once

// Diffusion limit: Euler-Maruyama along a precomputed fluid path, and the
// closed-form stationary laws for constant rates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "mtq/csv.hpp"
#include "mtq/fluid.hpp"
#include "mtq/model.hpp"
#include "mtq/quadrature.hpp"
#include "mtq/rng.hpp"

namespace mtq {

/// Drift of the diffusion limit at state x, with the branch picked by the
/// position of the fluid level q_t relative to k_t:
///   above: alpha - theta (x - gamma) - mu gamma
///   on:    alpha - theta (x - gamma)^+ - mu (x ^ gamma)
///   below: alpha - mu x
inline double diffusion_drift(Side side, double x, double alpha, double theta, double mu, double gamma) {
  switch (side) {
    case Side::above: return alpha - theta * (x - gamma) - mu * gamma;
    case Side::on: return alpha - theta * std::max(x - gamma, 0.0) - mu * std::min(x, gamma);
    case Side::below: return alpha - mu * x;
  }
  return 0.0;
}

/// Squared diffusion coefficient lambda + theta (q - k)^+ + mu (q ^ k).
inline double diffusion_variance_rate(double lambda, double theta, double mu, double q, double k) {
  return lambda + theta * std::max(q - k, 0.0) + mu * std::min(q, k);
}

struct DiffusionPath {
  std::vector<double> t;
  std::vector<double> x;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// Euler-Maruyama scheme for the diffusion limit with coefficients tabulated
/// once on the time grid, so that many replications share them.
class DiffusionSolver {
 public:
  DiffusionSolver(const Model& model, const FluidPath& fluid, double dt, double horizon) {
    if (!(dt > 0.0)) throw std::invalid_argument("solve_sde: dt must be > 0");
    if (!(horizon > 0.0)) throw std::invalid_argument("solve_sde: horizon must be > 0");
    if (fluid.horizon() < horizon * (1.0 - 1e-12))
      throw std::invalid_argument("solve_sde: fluid path does not cover the horizon");
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    t_.resize(steps + 1);
    for (std::size_t j = 0; j <= steps; ++j) t_[j] = std::min(horizon, static_cast<double>(j) * dt);
    t_.back() = horizon;

    coef_.resize(steps);
    const auto& sch = model.scheme;
    for (std::size_t j = 0; j < steps; ++j) {
      const double t = t_[j];
      const double q = fluid.at(t);
      const double k = sch.k.value(t);
      Coef& c = coef_[j];
      c.side = fluid.side_at(t);
      c.alpha = sch.alpha.value(t);
      c.theta = model.theta.value(t);
      c.mu = model.mu.value(t);
      c.gamma = sch.gamma.value(t);
      c.h = t_[j + 1] - t;
      const double var = diffusion_variance_rate(sch.lambda.value(t), c.theta, c.mu, q, k);
      c.sigma_sqrt_h = std::sqrt(var * c.h);
    }
  }

  std::size_t steps() const noexcept { return coef_.size(); }
  const std::vector<double>& grid() const noexcept { return t_; }
  Side side(std::size_t j) const { return coef_[j].side; }
  double sigma(std::size_t j) const { return coef_[j].sigma_sqrt_h / std::sqrt(coef_[j].h); }

  DiffusionPath path(double x0, std::uint64_t seed, std::uint64_t stream = 0) const {
    DiffusionPath p;
    p.seed = seed;
    p.stream = stream;
    p.t = t_;
    p.x.resize(t_.size());
    Rng rng(seed, stream);
    double x = x0;
    p.x[0] = x;
    for (std::size_t j = 0; j < coef_.size(); ++j) {
      x = step(j, x, rng.normal());
      p.x[j + 1] = x;
    }
    return p;
  }

  /// Values at the given grid indices (sorted), without storing the path.
  std::vector<double> sample(double x0, const std::vector<std::size_t>& indices, std::uint64_t seed,
                             std::uint64_t stream = 0) const {
    std::vector<double> out;
    out.reserve(indices.size());
    Rng rng(seed, stream);
    double x = x0;
    std::size_t next = 0;
    for (std::size_t j = 0; j <= coef_.size() && next < indices.size(); ++j) {
      while (next < indices.size() && indices[next] == j) {
        out.push_back(x);
        ++next;
      }
      if (j < coef_.size()) x = step(j, x, rng.normal());
    }
    return out;
  }

  double terminal(double x0, std::uint64_t seed, std::uint64_t stream = 0) const {
    Rng rng(seed, stream);
    double x = x0;
    for (std::size_t j = 0; j < coef_.size(); ++j) x = step(j, x, rng.normal());
    return x;
  }

 private:
  struct Coef {
    Side side = Side::below;
    double alpha = 0.0, theta = 0.0, mu = 0.0, gamma = 0.0;
    double h = 0.0;
    double sigma_sqrt_h = 0.0;
  };

  double step(std::size_t j, double x, double z) const {
    const Coef& c = coef_[j];
    return x + diffusion_drift(c.side, x, c.alpha, c.theta, c.mu, c.gamma) * c.h + c.sigma_sqrt_h * z;
  }

  std::vector<double> t_;
  std::vector<Coef> coef_;
};

inline DiffusionPath solve_sde(double x0, const Model& model, const FluidPath& fluid, double dt, double horizon,
                               std::uint64_t seed, std::uint64_t stream = 0) {
  return DiffusionSolver(model, fluid, dt, horizon).path(x0, seed, stream);
}

inline void write_diffusion_csv(std::ostream& os, const DiffusionPath& p) {
  os << "t,x\n";
  for (std::size_t i = 0; i < p.t.size(); ++i) csv::row(os, p.t[i], p.x[i]);
}

// ---------------------------------------------------------------------------
// Stationary laws.

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Normalizing constant of C exp(a x) (exp(-r x^2 / 2) 1{x >= 0} + exp(-x^2 / 2) 1{x < 0}),
/// a = alpha / mu, r = theta / mu. Each half-line integral is a shifted Gaussian tail:
///   int_0^inf  = exp(a^2 / (2 r)) sqrt(2 pi / r) Phi(a / sqrt(r))
///   int_-inf^0 = exp(a^2 / 2) sqrt(2 pi) Phi(-a)
inline double qed_normalizer(double alpha, double mu, double theta) {
  if (!(mu > 0.0 && theta > 0.0)) throw std::invalid_argument("qed_normalizer: mu and theta must be positive");
  const double a = alpha / mu, r = theta / mu;
  const double s2pi = std::sqrt(2.0 * std::numbers::pi);
  const double right = std::exp(a * a / (2.0 * r)) * s2pi / std::sqrt(r) * normal_cdf(a / std::sqrt(r));
  const double left = std::exp(a * a / 2.0) * s2pi * normal_cdf(-a);
  return 1.0 / (right + left);
}

enum class LawKind { gaussian, qed_piecewise };

inline std::string_view to_string(LawKind k) { return k == LawKind::gaussian ? "gaussian" : "qed-piecewise"; }

struct StationaryLaw {
  LawKind kind = LawKind::gaussian;
  double mean = 0.0;      // gaussian
  double variance = 1.0;  // gaussian
  double alpha = 0.0, mu = 1.0, theta = 1.0;  // qed-piecewise
  double normalizer = 0.0;                     // qed-piecewise C

  static StationaryLaw gaussian(double mean, double variance) {
    if (!(variance > 0.0)) throw std::invalid_argument("StationaryLaw: variance must be positive");
    StationaryLaw l;
    l.kind = LawKind::gaussian;
    l.mean = mean;
    l.variance = variance;
    return l;
  }

  static StationaryLaw qed(double alpha, double mu, double theta) {
    StationaryLaw l;
    l.kind = LawKind::qed_piecewise;
    l.alpha = alpha;
    l.mu = mu;
    l.theta = theta;
    l.normalizer = qed_normalizer(alpha, mu, theta);
    return l;
  }

  double pdf(double x) const {
    if (kind == LawKind::gaussian) {
      const double z = (x - mean) / std::sqrt(variance);
      return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi * variance);
    }
    const double a = alpha / mu, r = theta / mu;
    return normalizer * std::exp(a * x - (x >= 0.0 ? r : 1.0) * x * x / 2.0);
  }

  double cdf(double x) const {
    if (kind == LawKind::gaussian) return normal_cdf((x - mean) / std::sqrt(variance));
    const double a = alpha / mu, r = theta / mu, sr = std::sqrt(r);
    const double s2pi = std::sqrt(2.0 * std::numbers::pi);
    const double left_scale = normalizer * std::exp(a * a / 2.0) * s2pi;
    if (x < 0.0) return left_scale * normal_cdf(x - a);
    const double left_mass = left_scale * normal_cdf(-a);
    const double right_scale = normalizer * std::exp(a * a / (2.0 * r)) * s2pi / sr;
    return std::min(1.0, left_mass + right_scale * (normal_cdf(sr * x - a / sr) - normal_cdf(-a / sr)));
  }

  /// Mean and variance; closed form for gaussian, quadrature of the density otherwise.
  std::pair<double, double> moments() const {
    if (kind == LawKind::gaussian) return {mean, variance};
    const double inf = std::numeric_limits<double>::infinity();
    auto m = [&](int power) {
      auto f = [&](double x) { return std::pow(x, power) * pdf(x); };
      return quad::adaptive(f, -inf, 0.0, 1e-13) + quad::adaptive(f, 0.0, inf, 1e-13);
    };
    const double m1 = m(1), m2 = m(2);
    return {m1, m2 - m1 * m1};
  }

  /// Scale used to bracket the bulk of the law.
  double spread() const {
    if (kind == LawKind::gaussian) return std::sqrt(variance);
    return std::max(1.0, std::sqrt(mu / theta));
  }
};

/// Limit law of the stationary distributions for constant rates with k = 1.
inline StationaryLaw stationary_law(double lambda, double mu, double theta, double alpha, double q0) {
  if (!(lambda > 0.0 && mu > 0.0 && theta > 0.0))
    throw std::invalid_argument("stationary_law: rates must be positive");
  switch (regime_classify(lambda, mu, q0)) {
    case Regime::under:
    case Regime::critical_below: return StationaryLaw::gaussian(alpha / mu, lambda / mu);
    case Regime::over:
    case Regime::critical_above: return StationaryLaw::gaussian(alpha / theta, lambda / theta);
    case Regime::critical_at: return StationaryLaw::qed(alpha, mu, theta);
  }
  return StationaryLaw::gaussian(0.0, 1.0);
}

}  // namespace mtq
