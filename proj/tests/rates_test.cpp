#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mtq/quadrature.hpp"
#include "mtq/rates.hpp"

namespace {

using mtq::RateFunction;

constexpr double pi = std::numbers::pi;

RateFunction step_1_3() { return RateFunction::piecewise_constant({0.0, 1.0}, {1.0, 3.0}); }
RateFunction ramp_1_3() { return RateFunction::piecewise_linear({0.0, 2.0}, {1.0, 3.0}); }

// Random positive primitive (or a sum of two) for property checks.
RateFunction random_rate(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.1, 3.0);
  auto primitive = [&](int kind) {
    switch (kind) {
      case 0: return RateFunction::constant(u(gen));
      case 1: {
        std::vector<double> b{0.0}, v{u(gen)};
        for (int i = 0; i < 4; ++i) {
          b.push_back(b.back() + u(gen));
          v.push_back(u(gen));
        }
        return RateFunction::piecewise_constant(b, v);
      }
      case 2: {
        std::vector<double> b{u(gen) - 0.1}, v{u(gen)};
        for (int i = 0; i < 4; ++i) {
          b.push_back(b.back() + u(gen));
          v.push_back(u(gen));
        }
        return RateFunction::piecewise_linear(b, v);
      }
      default: {
        const double a = 1.0 + u(gen);
        return RateFunction::sinusoidal(a, 0.9 * std::uniform_real_distribution<double>(-1, 1)(gen), u(gen),
                                        std::uniform_real_distribution<double>(-pi, pi)(gen));
      }
    }
  };
  const int kind = static_cast<int>(gen() % 5);
  if (kind == 4) return RateFunction::sum({primitive(static_cast<int>(gen() % 4)), primitive(3)});
  return primitive(kind);
}

TEST(RateFunction, ValueExamples) {
  EXPECT_EQ(RateFunction::constant(2.0).value(5.0), 2.0);
  EXPECT_DOUBLE_EQ(RateFunction::sinusoidal(1.0, 0.5, 1.0, 0.0).value(pi / 2), 1.5);
  EXPECT_EQ(step_1_3().value(1.0), 3.0);
  EXPECT_EQ(step_1_3().value(std::nextafter(1.0, 0.0)), 1.0);
  EXPECT_DOUBLE_EQ(ramp_1_3().value(1.0), 2.0);
  EXPECT_DOUBLE_EQ(ramp_1_3().value(7.0), 3.0);
}

TEST(RateFunction, IntegralExamples) {
  EXPECT_DOUBLE_EQ(RateFunction::constant(2.0).integral(0.0, 3.0), 6.0);
  EXPECT_NEAR(RateFunction::sinusoidal(1.0, 1.0, 1.0, 0.0, true).integral(0.0, 2 * pi), 2 * pi, 1e-13);
  EXPECT_DOUBLE_EQ(ramp_1_3().integral(0.0, 2.0), 4.0);
  EXPECT_DOUBLE_EQ(step_1_3().integral(0.5, 2.0), 0.5 + 3.0);
}

TEST(RateFunction, ReversedIntervalThrows) {
  EXPECT_THROW(RateFunction::constant(1.0).integral(2.0, 1.0), std::invalid_argument);
  EXPECT_THROW(RateFunction::constant(1.0).sup_on(2.0, 1.0), std::invalid_argument);
}

TEST(RateFunction, SupExamples) {
  EXPECT_DOUBLE_EQ(RateFunction::sinusoidal(1.0, 0.5, 1.0, 0.0).sup_on(0.0, 2 * pi), 1.5);
  EXPECT_EQ(step_1_3().sup_on(0.0, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(ramp_1_3().sup_on(0.0, 2.0), 3.0);
  EXPECT_DOUBLE_EQ(RateFunction::sinusoidal(1.0, 0.5, 1.0, 0.0).inf_on(0.0, 2 * pi), 0.5);
  EXPECT_DOUBLE_EQ(RateFunction::sinusoidal(1.0, -0.5, 1.0, 0.0).sup_on(0.0, 1.0), 1.0);
}

TEST(RateFunction, RejectsNonPositiveRates) {
  EXPECT_THROW(RateFunction::constant(0.0), std::invalid_argument);
  EXPECT_THROW(RateFunction::sinusoidal(1.0, 1.5, 1.0, 0.0), std::invalid_argument);
  EXPECT_NO_THROW(RateFunction::sinusoidal(1.0, 1.5, 1.0, 0.0, true));
  EXPECT_THROW(RateFunction::piecewise_constant({0.5, 1.0}, {1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(RateFunction::piecewise_linear({0.0, 0.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST(RateFunction, ClosedFormIntegralMatchesQuadrature) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 12.0);
  for (int i = 0; i < 100; ++i) {
    const RateFunction f = random_rate(gen);
    double s = u(gen), t = u(gen);
    if (s > t) std::swap(s, t);
    // Split the quadrature at breakpoints so each piece is smooth.
    std::vector<double> cuts{s};
    for (double b : f.breakpoints_in(s, t)) cuts.push_back(b);
    cuts.push_back(t);
    double numeric = 0.0;
    for (std::size_t j = 0; j + 1 < cuts.size(); ++j)
      numeric += mtq::quad::adaptive([&](double x) { return f.value(x); }, cuts[j], cuts[j + 1], 1e-13);
    const double exact = f.integral(s, t);
    EXPECT_NEAR(exact, numeric, 1e-9 * std::max(1.0, std::abs(numeric))) << "case " << i;
  }
}

TEST(RateFunction, IntegralIsAdditive) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 12.0);
  for (int i = 0; i < 100; ++i) {
    const RateFunction f = random_rate(gen);
    std::array<double, 3> p{u(gen), u(gen), u(gen)};
    std::sort(p.begin(), p.end());
    const double whole = f.integral(p[0], p[2]);
    EXPECT_NEAR(f.integral(p[0], p[1]) + f.integral(p[1], p[2]), whole, 1e-12 * std::max(1.0, std::abs(whole)));
  }
}

TEST(RateFunction, SupNeverUnderestimates) {
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> u(0.0, 12.0), w(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const RateFunction f = random_rate(gen);
    double s = u(gen), t = u(gen);
    if (s > t) std::swap(s, t);
    const double x = s + w(gen) * (t - s);
    EXPECT_GE(f.sup_on(s, t), f.value(x)) << "case " << i;
    EXPECT_LE(f.inf_on(s, t), f.value(x)) << "case " << i;
  }
}

TEST(RateFunction, ScaledMultipliesEverywhere) {
  std::mt19937_64 gen(17);
  for (int i = 0; i < 50; ++i) {
    const RateFunction f = random_rate(gen);
    const RateFunction g = f.scaled(-2.5);
    EXPECT_TRUE(g.is_signed());
    EXPECT_NEAR(g.value(1.7), -2.5 * f.value(1.7), 1e-12);
    EXPECT_NEAR(g.integral(0.3, 4.1), -2.5 * f.integral(0.3, 4.1), 1e-11);
  }
}

mtq::ScalingScheme scheme(double q0, double x0, double lambda, double alpha, double k, double gamma) {
  mtq::ScalingScheme s;
  s.q0 = q0;
  s.x0 = x0;
  s.lambda = RateFunction::constant(lambda);
  s.alpha = RateFunction::constant(alpha, true);
  s.k = RateFunction::constant(k);
  s.gamma = RateFunction::constant(gamma, true);
  return s;
}

TEST(Prelimit, Examples) {
  auto p = mtq::prelimit(scheme(1, 0, 1, 0, 1, 0), 100, 10.0);
  EXPECT_DOUBLE_EQ(p.lambda.value(3.0), 100.0);
  EXPECT_EQ(p.servers.value(3.0), 100);
  EXPECT_EQ(p.servers.starts().size(), 1u);
  EXPECT_EQ(p.q0, 100);

  p = mtq::prelimit(scheme(1, 2, 1, 0.5, 1, 0), 100, 10.0);
  EXPECT_DOUBLE_EQ(p.lambda.value(0.0), 105.0);
  EXPECT_EQ(p.q0, 120);

  p = mtq::prelimit(scheme(0.5, 0, 1, -0.5, 1, 1), 4, 10.0);
  EXPECT_DOUBLE_EQ(p.lambda.value(2.0), 3.0);
  EXPECT_EQ(p.servers.value(2.0), 6);
  EXPECT_EQ(p.q0, 2);
}

TEST(Prelimit, RejectsNonPositiveArrivalRateAndNamesTime) {
  mtq::ScalingScheme s = scheme(1, 0, 1, 0, 1, 0);
  s.alpha = RateFunction::piecewise_constant({0.0, 2.5}, {0.0, -20.0}, true);
  try {
    (void)mtq::prelimit(s, 4, 10.0);
    FAIL() << "expected throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("t = 2.5"), std::string::npos) << e.what();
  }
  EXPECT_NO_THROW((void)mtq::prelimit(s, 1000, 10.0));
  EXPECT_THROW((void)mtq::prelimit(s, 0, 10.0), std::invalid_argument);
}

TEST(Prelimit, ServerScheduleMatchesPointwiseRounding) {
  mtq::ScalingScheme s = scheme(0, 0, 1, 0, 1, 0);
  s.k = RateFunction::sinusoidal(1.0, 0.25, 0.5, 0.0);
  s.gamma = RateFunction::sinusoidal(0.0, 1.0, 3.0, 0.2, true);
  const double horizon = 20.0;
  for (std::int64_t n : {3, 50, 2500}) {
    const auto p = mtq::prelimit(s, n, horizon);
    const double rn = static_cast<double>(n);
    std::mt19937_64 gen(static_cast<unsigned>(n));
    std::uniform_real_distribution<double> u(0.0, horizon);
    int mismatches = 0;
    for (int i = 0; i < 20000; ++i) {
      const double t = u(gen);
      const double level = rn * s.k.value(t) + std::sqrt(rn) * s.gamma.value(t);
      const auto expected = std::max<std::int64_t>(1, std::llround(level));
      // Exact agreement away from a jump; allow a hair-width window around one.
      if (p.servers.value(t) != expected) {
        const double prev = p.servers.next_change_after(t - 1e-9);
        if (!(std::abs(prev - t) < 1e-9)) ++mismatches;
      }
    }
    EXPECT_EQ(mismatches, 0) << "n = " << n;
  }
}

TEST(Prelimit, ScalingConsistency) {
  mtq::ScalingScheme s = scheme(0, 0, 1, 0, 1, 0);
  s.k = RateFunction::sinusoidal(1.0, 0.25, 0.5, 0.0);
  s.gamma = RateFunction::sinusoidal(0.3, 0.6, 1.0, 0.0, true);
  for (std::int64_t n : {4, 100, 10000}) {
    const auto p = mtq::prelimit(s, n, 10.0);
    const double rn = static_cast<double>(n), sn = std::sqrt(rn);
    for (double t = 0.0; t <= 10.0; t += 0.01) {
      const double kn = static_cast<double>(p.servers.value(t)) / rn;
      const double k = s.k.value(t), g = s.gamma.value(t);
      EXPECT_LE(std::abs(kn - k), (std::abs(g) + 1.0) / sn);
      EXPECT_LE(std::abs(sn * (kn - k) - g), 1.0 / sn);
    }
  }
}

}  // namespace
