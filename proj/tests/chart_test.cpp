#include "csb_ewma/chart.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "csb_ewma/validation.hpp"

namespace csb_ewma {
namespace {

ChartParams params(int k, double lambda, double limit, double r0 = 0.0) {
  ChartParams p;
  p.k = k;
  p.lambda = lambda;
  p.limit_multiplier = limit;
  p.r0 = r0;
  return p;
}

// Var(r_t) from the covariance matrix of (W_1..W_t): Cov(W_i, W_j) =
// sqrt(min/max), r_t = lambda * sum_i a^{t-i} W_i. Independent of both the
// double-sum layout and the recurrence.
double variance_by_covariance_matrix(double lambda, int t) {
  const double a = 1.0 - lambda;
  double v = 0.0;
  for (int i = 1; i <= t; ++i) {
    for (int j = 1; j <= t; ++j) {
      const double cov = std::sqrt(static_cast<double>(std::min(i, j)) / std::max(i, j));
      v += std::pow(a, t - i) * std::pow(a, t - j) * cov;
    }
  }
  return lambda * lambda * v;
}

TEST(Dichotomize, SignAndTie) {
  EXPECT_EQ(dichotomize(0.7, 0.0), 1);
  EXPECT_EQ(dichotomize(-0.7, 0.0), 0);
  EXPECT_EQ(dichotomize(0.5, 0.5), 1);
}

TEST(Dichotomize, RejectsNonFinite) {
  EXPECT_THROW(dichotomize(std::nan(""), 0.0), std::invalid_argument);
  EXPECT_THROW(dichotomize(INFINITY, 0.0), std::invalid_argument);
  EXPECT_THROW(dichotomize(1.0, -INFINITY), std::invalid_argument);
}

TEST(PeriodCount, Sums) {
  const std::vector<int> a{1, 0, 1, 1};
  EXPECT_EQ(period_count(a, 4).c, 3);
  const std::vector<int> b{0, 0, 0};
  EXPECT_EQ(period_count(b, 3).c, 0);
  const std::vector<int> c(10, 1);
  EXPECT_EQ(period_count(c, 10).c, 10);
}

TEST(PeriodCount, WrongLengthIsConfigurationError) {
  const std::vector<int> a{1, 0, 1};
  EXPECT_THROW(period_count(a, 4), std::invalid_argument);
  const std::vector<int> bad{1, 2};
  EXPECT_THROW(period_count(bad, 2), std::invalid_argument);
}

TEST(Standardize, HandValues) {
  EXPECT_DOUBLE_EQ(standardize(5, 1, params(10, 0.2, 1.4)), 0.0);
  EXPECT_DOUBLE_EQ(standardize(4, 1, params(4, 0.2, 1.4)), 2.0);
  EXPECT_DOUBLE_EQ(standardize(0, 2, params(2, 0.2, 1.4)), -2.0);
}

TEST(Standardize, RejectsZeroPeriodAndOverflowingCount) {
  EXPECT_THROW(standardize(0, 0, params(4, 0.2, 1.4)), std::invalid_argument);
  EXPECT_THROW(standardize(9, 2, params(4, 0.2, 1.4)), std::invalid_argument);
}

TEST(EwmaUpdate, HandValues) {
  EXPECT_DOUBLE_EQ(ewma_update(0.0, 0.0, 0.2), 0.0);
  EXPECT_DOUBLE_EQ(ewma_update(123.4, -0.75, 1.0), -0.75);
  EXPECT_NEAR(ewma_update(0.0, 2.0, 0.2), 0.4, 1e-15);
}

TEST(VarianceDirect, FirstPeriodIsLambdaSquared) {
  for (double l : {0.05, 0.2, 0.5, 0.9, 1.0}) EXPECT_DOUBLE_EQ(variance_exact_direct(l, 1), l * l);
  EXPECT_NEAR(variance_exact_direct(0.2, 1), 0.04, 1e-17);
}

TEST(VarianceDirect, LambdaOneIsUnitVariance) {
  for (std::uint64_t t : {1, 2, 7, 100, 513}) EXPECT_DOUBLE_EQ(variance_exact_direct(1.0, t), 1.0);
}

TEST(VarianceDirect, HandEvaluatedSecondPeriod) {
  // 0.25 * (2 * 0.5 * (1/sqrt 2) + 0.25 + 1)
  const double expected = 0.25 * (std::sqrt(0.5) + 1.25);
  EXPECT_NEAR(variance_exact_direct(0.5, 2), expected, 1e-15);
  EXPECT_NEAR(variance_exact_direct(0.5, 2), 0.4892767, 1e-6);
}

TEST(VarianceDirect, MatchesCovarianceMatrixRoute) {
  for (double l : {0.1, 0.35, 0.8}) {
    for (int t : {1, 2, 3, 10, 40}) {
      EXPECT_NEAR(variance_exact_direct(l, t), variance_by_covariance_matrix(l, t),
                  1e-13 * variance_by_covariance_matrix(l, t))
          << "lambda=" << l << " t=" << t;
    }
  }
}

TEST(VarianceDirect, RejectsBadArguments) {
  EXPECT_THROW(variance_exact_direct(0.0, 5), std::invalid_argument);
  EXPECT_THROW(variance_exact_direct(1.5, 5), std::invalid_argument);
  EXPECT_THROW(variance_exact_direct(0.2, 0), std::invalid_argument);
}

TEST(VarianceStep, FirstStepFromZero) {
  const ChartState fresh;
  const VarianceStep v = variance_step(fresh, 0.3);
  EXPECT_DOUBLE_EQ(v.var_r, 0.09);
  EXPECT_DOUBLE_EQ(v.cross_acc, 0.0);
}

TEST(VarianceStep, TwoStepsMatchHandValue) {
  ChartState s;
  for (int t = 1; t <= 2; ++t) {
    const VarianceStep v = variance_step(s, 0.5);
    s.t = t;
    s.var_r = v.var_r;
    s.cross_acc = v.cross_acc;
  }
  EXPECT_NEAR(s.var_r, 0.25 * (std::sqrt(0.5) + 1.25), 1e-15);
}

TEST(VarianceStep, OracleEquivalenceUpTo512) {
  for (double l : {0.1, 0.2, 0.5, 0.9, 1.0}) {
    const VarianceSweep sweep = sweep_variance(l, 512);
    EXPECT_LE(sweep.max_rel_error, 1e-10) << "lambda=" << l;
  }
}

TEST(VarianceStep, LongRunAgreementAtT100) {
  ChartState s;
  for (int t = 1; t <= 100; ++t) {
    const VarianceStep v = variance_step(s, 0.2);
    s.t = t;
    s.var_r = v.var_r;
    s.cross_acc = v.cross_acc;
  }
  const double direct = variance_exact_direct(0.2, 100);
  EXPECT_LE(std::abs(s.var_r - direct) / direct, 1e-10);
}

TEST(VarianceProperty, BoundedByDecayEnvelope) {
  for (int i = 1; i <= 20; ++i) {
    const double l = 0.05 * i;
    const VarianceSweep sweep = sweep_variance(l, 512);
    EXPECT_TRUE(sweep.bound_ok) << "lambda=" << l;
  }
}

TEST(VarianceProperty, ApproachesOne) {
  const double v = variance_exact_direct(0.2, 10'000);
  EXPECT_GT(v, 0.98);
  EXPECT_LE(v, 1.0);
}

TEST(ControlLimits, FirstPeriodHandValue) {
  const ChartParams p = params(10, 0.2, 1.4);
  const ControlLimits lim = control_limits(1, 0.04, p);
  EXPECT_NEAR(lim.lcl, -0.28, 1e-15);
  EXPECT_NEAR(lim.ucl, 0.28, 1e-15);
}

TEST(ControlLimits, SymmetryAboutDecayedStart) {
  const ChartParams zero = params(10, 0.2, 1.4);
  for (std::uint64_t t : {1, 3, 50}) {
    const ControlLimits lim = control_limits(t, 0.37, zero);
    EXPECT_EQ(lim.ucl + lim.lcl, 0.0);
  }
  const ChartParams shifted = params(10, 0.3, 2.0, 1.5);
  for (std::uint64_t t : {1, 3, 50}) {
    const ControlLimits lim = control_limits(t, 0.37, shifted);
    EXPECT_NEAR(lim.ucl + lim.lcl, 2.0 * std::pow(0.7, static_cast<double>(t)) * 1.5, 1e-15);
    EXPECT_LE(lim.lcl, lim.ucl);
  }
}

TEST(ControlLimits, SteadyStateApproachesL) {
  const ChartParams p = params(10, 0.2, 1.4);
  const ControlLimits lim = control_limits(10'000, variance_exact_direct(0.2, 10'000), p);
  EXPECT_NEAR(lim.ucl, 1.4, 0.015);
  EXPECT_NEAR(lim.lcl, -1.4, 0.015);
}

TEST(Step, MeanCenteredCountStaysAtZero) {
  const ChartParams p = params(6, 0.2, 1.4);
  ChartState s = initial_state(p);
  for (int i = 0; i < 50; ++i) {
    s = step(s, PeriodCount{3}, p);
    EXPECT_EQ(s.w, 0.0);
    EXPECT_EQ(s.r, 0.0);
    EXPECT_FALSE(s.signaled);
    EXPECT_EQ(s.ucl, -s.lcl);
  }
}

TEST(Step, FullCountSignalsAtFirstPeriod) {
  const ChartParams p = params(4, 0.2, 1.4);
  const ChartState s = step(initial_state(p), PeriodCount{4}, p);
  EXPECT_EQ(s.t, 1u);
  EXPECT_EQ(s.q, 4u);
  EXPECT_DOUBLE_EQ(s.w, 2.0);
  EXPECT_NEAR(s.r, 0.4, 1e-15);
  EXPECT_NEAR(s.ucl, 0.28, 1e-15);
  EXPECT_TRUE(s.signaled);
  EXPECT_EQ(s.signal_period, 1u);
}

TEST(Step, SignalPeriodKeptWhenSteppingOn) {
  const ChartParams p = params(4, 0.2, 1.4);
  ChartState s = step(initial_state(p), PeriodCount{4}, p);
  for (int i = 0; i < 10; ++i) s = step(s, PeriodCount{2}, p);
  EXPECT_TRUE(s.signaled);
  EXPECT_EQ(s.signal_period, 1u);
  EXPECT_EQ(s.t, 11u);
}

TEST(Step, LambdaOneIsMemoryless) {
  const ChartParams p = params(7, 1.0, 3.0);
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> count(0, 7);
  ChartState s = initial_state(p);
  for (int i = 0; i < 500; ++i) {
    s = step(s, PeriodCount{count(gen)}, p);
    ASSERT_EQ(s.r, s.w);
    ASSERT_EQ(s.var_r, 1.0);
  }
}

TEST(Step, RejectsCountOutsideRange) {
  const ChartParams p = params(4, 0.2, 1.4);
  EXPECT_THROW(step(initial_state(p), PeriodCount{5}, p), std::invalid_argument);
  EXPECT_THROW(step(initial_state(p), PeriodCount{-1}, p), std::invalid_argument);
}

TEST(StepProperty, BookkeepingAndEnvelope) {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const int k = 1 + static_cast<int>(gen() % 30);
    const double lambda = 0.05 + 0.95 * std::uniform_real_distribution<double>()(gen);
    const ChartParams p = params(k, lambda, 0.5 + 2.0 * (gen() % 100) / 100.0, trial % 3 - 1.0);
    std::uniform_int_distribution<int> count(0, k);
    ChartState s = initial_state(p);
    std::uint64_t total = 0;
    bool ever_outside = false;
    for (int t = 1; t <= 200; ++t) {
      const int c = count(gen);
      total += static_cast<std::uint64_t>(c);
      s = step(s, PeriodCount{c}, p);
      ASSERT_EQ(s.q, total);
      ASSERT_LE(s.q, static_cast<std::uint64_t>(k) * s.t);
      const double envelope = std::pow(1.0 - std::pow(1.0 - lambda, t), 2.0);
      ASSERT_LE(s.var_r, envelope * (1.0 + 1e-12));
      ASSERT_GE(s.var_r, 0.0);
      ASSERT_LE(s.lcl, s.ucl);
      ever_outside = ever_outside || s.r > s.ucl || s.r < s.lcl;
      ASSERT_EQ(s.signaled, ever_outside);
    }
  }
}

TEST(ChartParamsTest, Validation) {
  EXPECT_NO_THROW(params(1, 1.0, 0.1).validate());
  EXPECT_THROW(params(0, 0.2, 1.4).validate(), std::invalid_argument);
  EXPECT_THROW(params(3, 0.0, 1.4).validate(), std::invalid_argument);
  EXPECT_THROW(params(3, 1.01, 1.4).validate(), std::invalid_argument);
  EXPECT_THROW(params(3, 0.2, 0.0).validate(), std::invalid_argument);
  ChartParams p = params(3, 0.2, 1.4);
  p.p0 = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(ChartTest, DichotomizesObservations) {
  ChartParams p = params(3, 0.5, 1.4);
  p.median0 = 10.0;
  Chart chart(p);
  const std::vector<double> obs{10.0, 9.9, 12.0};
  chart.update(obs);
  EXPECT_EQ(chart.state().q, 2u);
  EXPECT_THROW(chart.update(std::vector<double>{1.0, 2.0}), std::invalid_argument);
  chart.reset();
  EXPECT_EQ(chart.state().t, 0u);
}

}  // namespace
}  // namespace csb_ewma
