#pragma once

// Statistical checks used to certify the limit theorems: KS goodness of fit,
// moment estimates with standard errors, and an exact birth-death oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace mtq {

struct EmpiricalSample {
  std::vector<double> values;
  std::optional<std::vector<double>> weights;  // e.g. holding times for time averages

  EmpiricalSample() = default;
  explicit EmpiricalSample(std::vector<double> v) : values(std::move(v)) {}
  EmpiricalSample(std::vector<double> v, std::vector<double> w) : values(std::move(v)), weights(std::move(w)) {
    if (weights->size() != values.size()) throw std::invalid_argument("EmpiricalSample: weight count mismatch");
    double total = 0.0;
    for (double x : *weights) {
      if (!(x >= 0.0)) throw std::invalid_argument("EmpiricalSample: weights must be nonnegative");
      total += x;
    }
    if (!(total > 0.0)) throw std::invalid_argument("EmpiricalSample: weights must have positive sum");
  }

  std::size_t size() const noexcept { return values.size(); }
};

/// Survival function of the Kolmogorov distribution, P(K > x).
inline double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.18) {
    // Small-x form: P(K <= x) = sqrt(2 pi)/x sum exp(-(2j-1)^2 pi^2 / (8 x^2)).
    const double f = -std::numbers::pi * std::numbers::pi / (8.0 * x * x);
    double cdf = 0.0;
    for (int j = 1; j <= 8; ++j) {
      const double m = 2.0 * j - 1.0;
      cdf += std::exp(f * m * m);
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / x;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * x * x);
    sum += (j % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against a continuous cdf.
/// The p-value uses the asymptotic Kolmogorov law at sqrt(n_eff) * D, where
/// n_eff = (sum w)^2 / sum w^2 for weighted samples.
inline KsResult ks_statistic(const EmpiricalSample& sample, const std::function<double(double)>& cdf) {
  if (sample.values.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  const std::size_t n = sample.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sample.values[a] < sample.values[b]; });

  double total = 0.0, total_sq = 0.0;
  if (sample.weights) {
    for (double w : *sample.weights) {
      total += w;
      total_sq += w * w;
    }
  } else {
    total = static_cast<double>(n);
    total_sq = total;
  }

  double d = 0.0;
  double below = 0.0;  // empirical mass strictly below the current value
  for (std::size_t i = 0; i < n;) {
    const double x = sample.values[order[i]];
    double mass = 0.0;
    std::size_t j = i;
    while (j < n && sample.values[order[j]] == x) {
      mass += sample.weights ? (*sample.weights)[order[j]] : 1.0;
      ++j;
    }
    const double f = cdf(x);
    const double left = below / total;
    const double right = (below + mass) / total;
    d = std::max({d, std::abs(f - left), std::abs(right - f)});
    below += mass;
    i = j;
  }
  const double n_eff = total * total / total_sq;
  return {d, kolmogorov_survival(std::sqrt(n_eff) * d)};
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double se_mean = 0.0;
  double se_variance = 0.0;
};

/// Mean and unbiased variance with standard errors; se_variance uses the
/// fourth central moment: Var(s^2) ~ (m4 - (n-3)/(n-1) s^4) / n.
inline Moments moments(const EmpiricalSample& sample) {
  const std::size_t n = sample.size();
  if (n < 2) throw std::invalid_argument("moments: need at least 2 values");
  if (sample.weights) throw std::invalid_argument("moments: weighted samples are not supported");
  const double rn = static_cast<double>(n);
  double mean = 0.0;
  for (double x : sample.values) mean += x;
  mean /= rn;
  double m2 = 0.0, m4 = 0.0;
  for (double x : sample.values) {
    const double d = x - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  const double var = m2 / (rn - 1.0);
  m4 /= rn;
  Moments m;
  m.mean = mean;
  m.variance = var;
  m.se_mean = std::sqrt(var / rn);
  m.se_variance = std::sqrt(std::max(0.0, (m4 - (rn - 3.0) / (rn - 1.0) * var * var) / rn));
  return m;
}

struct CovarianceEstimate {
  double covariance = 0.0;
  double se = 0.0;
};

/// Sample covariance with the standard error of the mean of centred products.
inline CovarianceEstimate covariance(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("covariance: need matching samples, n >= 2");
  const double rn = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / rn;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / rn;
  std::vector<double> prod(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) prod[i] = (x[i] - mx) * (y[i] - my);
  const double mean_prod = std::accumulate(prod.begin(), prod.end(), 0.0) / rn;
  double ss = 0.0;
  for (double p : prod) ss += (p - mean_prod) * (p - mean_prod);
  return {mean_prod * rn / (rn - 1.0), std::sqrt(ss / (rn - 1.0) / rn)};
}

/// Mergeable running mean/variance (Chan et al. pairwise update).
struct RunningMoments {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }

  void merge(const RunningMoments& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(count), nb = static_cast<double>(o.count);
    const double d = o.mean - mean;
    const double n = na + nb;
    mean += d * nb / n;
    m2 += o.m2 + d * d * na * nb / n;
    count += o.count;
  }

  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

/// Birth-death chain on {0, ..., J}: birth[j] is the up-rate from j, death[j]
/// the down-rate from j (death[0] = 0).
struct BDChain {
  std::vector<double> birth;
  std::vector<double> death;

  std::size_t states() const noexcept { return birth.size(); }

  /// M/M/K+M chain truncated where the remaining tail mass is below tail_tol.
  static BDChain erlang_a(double lambda, double mu, double theta, std::int64_t servers, double tail_tol = 1e-12) {
    if (!(lambda > 0.0 && mu > 0.0 && theta >= 0.0) || servers < 1)
      throw std::invalid_argument("BDChain::erlang_a: invalid rates");
    if (theta == 0.0 && lambda >= mu * static_cast<double>(servers))
      throw std::invalid_argument("BDChain::erlang_a: chain without abandonment is not positive recurrent");
    auto death_rate = [&](std::int64_t j) {
      const auto busy = std::min(j, servers);
      return mu * static_cast<double>(busy) + theta * static_cast<double>(std::max<std::int64_t>(0, j - servers));
    };
    BDChain c;
    c.birth.push_back(lambda);
    c.death.push_back(0.0);
    double weight = 1.0, total = 1.0;
    for (std::int64_t j = 1;; ++j) {
      const double d = death_rate(j);
      weight *= lambda / d;
      total += weight;
      c.birth.push_back(lambda);
      c.death.push_back(d);
      // Beyond this state the ratio lambda/d_{i} only decreases, so the tail is
      // dominated by a geometric series with ratio r = lambda / d_{j+1}.
      const double r = lambda / death_rate(j + 1);
      if (r < 1.0 && weight * r / (1.0 - r) < tail_tol * total) break;
    }
    return c;
  }
};

/// Stationary law of a birth-death chain by the product form.
inline std::vector<double> bd_stationary(const BDChain& chain) {
  const std::size_t n = chain.states();
  if (n == 0 || chain.death.size() != n) throw std::invalid_argument("bd_stationary: malformed chain");
  std::vector<double> pi(n);
  pi[0] = 1.0;
  for (std::size_t j = 1; j < n; ++j) {
    if (!(chain.death[j] > 0.0)) throw std::invalid_argument("bd_stationary: zero death rate above state 0");
    pi[j] = pi[j - 1] * chain.birth[j - 1] / chain.death[j];
  }
  const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) throw std::invalid_argument("bd_stationary: degenerate products");
  for (auto& p : pi) p /= total;
  return pi;
}

inline double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("tv_distance: length mismatch");
  const double sp = std::accumulate(p.begin(), p.end(), 0.0), sq = std::accumulate(q.begin(), q.end(), 0.0);
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
    throw std::invalid_argument("tv_distance: inputs must be probability vectors");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

/// Sample median (average of the middle pair for even sizes).
inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace mtq
