#ifndef CSB_EWMA_CHART_HPP_
#define CSB_EWMA_CHART_HPP_

// Cumulative Standardized Binomial EWMA (CSB-EWMA) chart for k parallel
// streams monitored against a known in-control median.
//
// Each period, every stream contributes one indicator x = I(y >= median0).
// The chart tracks the cumulative exceedance count Q_t, standardizes it to
// W_t = (Q_t - k p0 t) / sqrt(k p0 (1 - p0) t), smooths it with
// r_t = lambda W_t + (1 - lambda) r_{t-1}, and compares r_t against limits
// built from the exact finite-t variance of r_t. Because Q_t is cumulative,
// Corr(W_s, W_t) = sqrt(s / t) for s <= t, which is what the exact variance
// accounts for.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace csb_ewma {

struct ChartParams {
  int k = 1;                      // number of streams
  double lambda = 0.2;            // EWMA smoothing, (0, 1]
  double limit_multiplier = 1.4;  // L
  double p0 = 0.5;                // in-control exceedance probability
  double median0 = 0.0;           // in-control median used for dichotomizing
  double r0 = 0.0;                // EWMA start value

  void validate() const {
    if (k < 1) throw std::invalid_argument("stream count k must be >= 1");
    if (!(lambda > 0.0 && lambda <= 1.0))
      throw std::invalid_argument("lambda must lie in (0, 1]");
    if (!(limit_multiplier > 0.0) || !std::isfinite(limit_multiplier))
      throw std::invalid_argument("limit multiplier L must be positive and finite");
    if (!(p0 > 0.0 && p0 < 1.0)) throw std::invalid_argument("p0 must lie in (0, 1)");
    if (!std::isfinite(median0)) throw std::invalid_argument("median0 must be finite");
    if (!std::isfinite(r0)) throw std::invalid_argument("r0 must be finite");
  }
};

/// Number of exceedances among the k streams in one period.
struct PeriodCount {
  int c = 0;
};

struct ControlLimits {
  double lcl = 0.0;
  double ucl = 0.0;
};

struct ChartState {
  std::uint64_t t = 0;      // periods observed so far
  std::uint64_t q = 0;      // cumulative exceedance count Q_t
  double w = 0.0;           // standardized statistic W_t
  double r = 0.0;           // EWMA statistic r_t
  double var_r = 0.0;       // exact Var(r_t)
  double cross_acc = 0.0;   // B_t = sum_{j<t} (1-lambda)^{t-j} sqrt(j)
  double decay_pow = 1.0;   // (1-lambda)^t, kept by repeated multiplication
  double lcl = 0.0;
  double ucl = 0.0;
  bool signaled = false;
  std::uint64_t signal_period = 0;  // first period outside the limits, 0 if none
};

inline ChartState initial_state(const ChartParams& params) {
  ChartState s;
  s.r = params.r0;
  s.lcl = params.r0;
  s.ucl = params.r0;
  return s;
}

/// Indicator I(y >= median0). A tie counts as an exceedance.
inline int dichotomize(double y, double median0) {
  if (!std::isfinite(y) || !std::isfinite(median0))
    throw std::invalid_argument("dichotomize: non-finite input");
  return y >= median0 ? 1 : 0;
}

inline PeriodCount period_count(std::span<const int> indicators, int k) {
  if (indicators.size() != static_cast<std::size_t>(k))
    throw std::invalid_argument("period_count: expected " + std::to_string(k) +
                                " indicators, got " + std::to_string(indicators.size()));
  int c = 0;
  for (int x : indicators) {
    if (x != 0 && x != 1) throw std::invalid_argument("period_count: indicator must be 0 or 1");
    c += x;
  }
  return PeriodCount{c};
}

namespace detail {

inline double standard_deviation_of_q(int k, double p0, std::uint64_t t) {
  return std::sqrt(static_cast<double>(k) * p0 * (1.0 - p0) * static_cast<double>(t));
}

inline double standardize_unchecked(std::uint64_t q, std::uint64_t t, int k, double p0) {
  const double mean = static_cast<double>(k) * p0 * static_cast<double>(t);
  return (static_cast<double>(q) - mean) / standard_deviation_of_q(k, p0, t);
}

}  // namespace detail

inline double standardize(std::uint64_t q, std::uint64_t t, const ChartParams& params) {
  if (t == 0) throw std::invalid_argument("standardize: t must be >= 1");
  if (q > static_cast<std::uint64_t>(params.k) * t)
    throw std::invalid_argument("standardize: Q exceeds k*t");
  return detail::standardize_unchecked(q, t, params.k, params.p0);
}

inline double ewma_update(double r_prev, double w, double lambda) {
  return lambda * w + (1.0 - lambda) * r_prev;
}

/// Exact Var(r_t) evaluated as the literal double sum
///   lambda^2 [ 2 sum_{j=1}^{t-1} sum_{i=j+1}^{t} a^{2t-i-j} sqrt(j)/sqrt(i)
///              + sum_{i=1}^{t} a^{2t-2i} ],   a = 1 - lambda,
/// with 0^0 = 1. O(t^2); this is the reference the incremental form is
/// checked against, not the monitoring path.
inline double variance_exact_direct(double lambda, std::uint64_t t) {
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw std::invalid_argument("variance_exact_direct: lambda must lie in (0, 1]");
  if (t == 0) throw std::invalid_argument("variance_exact_direct: t must be >= 1");
  const double a = 1.0 - lambda;
  // a^n for every exponent 0..2t-2 appearing in the sum, each from std::pow.
  std::vector<double> pw(2 * t - 1);
  for (std::size_t n = 0; n < pw.size(); ++n) pw[n] = std::pow(a, static_cast<double>(n));
  std::vector<double> root(t + 1);
  for (std::uint64_t n = 1; n <= t; ++n) root[n] = std::sqrt(static_cast<double>(n));

  double cross = 0.0;
  for (std::uint64_t j = 1; j + 1 <= t; ++j) {
    for (std::uint64_t i = j + 1; i <= t; ++i) {
      cross += pw[2 * t - i - j] * root[j] / root[i];
    }
  }
  double diag = 0.0;
  for (std::uint64_t i = 1; i <= t; ++i) diag += pw[2 * t - 2 * i];
  return lambda * lambda * (2.0 * cross + diag);
}

struct VarianceStep {
  double var_r = 0.0;
  double cross_acc = 0.0;
};

/// Advances Var(r) from period state.t to state.t + 1 in O(1):
///   B_1 = 0,  B_{t} = a (B_{t-1} + sqrt(t-1)),
///   V_t = a^2 V_{t-1} + lambda^2 (1 + 2 B_t / sqrt(t)).
inline VarianceStep variance_step(const ChartState& state, double lambda) {
  const double a = 1.0 - lambda;
  const std::uint64_t t = state.t + 1;
  const double cross =
      state.t == 0 ? 0.0 : a * (state.cross_acc + std::sqrt(static_cast<double>(state.t)));
  const double var =
      a * a * state.var_r +
      lambda * lambda * (1.0 + 2.0 * cross / std::sqrt(static_cast<double>(t)));
  return VarianceStep{var, cross};
}

/// Limits around an explicit centre (1-lambda)^t r0.
inline ControlLimits control_limits_about(double center, double var_r, double limit_multiplier) {
  const double half_width = limit_multiplier * std::sqrt(var_r);
  return ControlLimits{center - half_width, center + half_width};
}

inline ControlLimits control_limits(std::uint64_t t, double var_r, const ChartParams& params) {
  if (!(var_r >= 0.0)) throw std::invalid_argument("control_limits: var_r must be >= 0");
  const double center =
      params.r0 == 0.0 ? 0.0 : std::pow(1.0 - params.lambda, static_cast<double>(t)) * params.r0;
  return control_limits_about(center, var_r, params.limit_multiplier);
}

/// One monitoring period. Stepping past a signal is allowed; the first signal
/// period is kept.
inline ChartState step(const ChartState& state, PeriodCount count, const ChartParams& params) {
  if (count.c < 0 || count.c > params.k)
    throw std::invalid_argument("step: period count " + std::to_string(count.c) +
                                " outside [0, " + std::to_string(params.k) + "]");
  ChartState next = state;
  const VarianceStep v = variance_step(state, params.lambda);
  next.t = state.t + 1;
  next.q = state.q + static_cast<std::uint64_t>(count.c);
  next.w = detail::standardize_unchecked(next.q, next.t, params.k, params.p0);
  next.r = ewma_update(state.r, next.w, params.lambda);
  next.var_r = v.var_r;
  next.cross_acc = v.cross_acc;
  next.decay_pow = state.decay_pow * (1.0 - params.lambda);
  const ControlLimits lim =
      control_limits_about(next.decay_pow * params.r0, next.var_r, params.limit_multiplier);
  next.lcl = lim.lcl;
  next.ucl = lim.ucl;
  const bool outside = next.r > next.ucl || next.r < next.lcl;
  if (outside && !state.signaled) next.signal_period = next.t;
  next.signaled = state.signaled || outside;
  return next;
}

/// Stateful convenience wrapper: owns the parameters and the running state.
class Chart {
 public:
  explicit Chart(ChartParams params) : params_(params) {
    params_.validate();
    state_ = initial_state(params_);
  }

  const ChartParams& params() const noexcept { return params_; }
  const ChartState& state() const noexcept { return state_; }

  const ChartState& update(PeriodCount count) {
    state_ = step(state_, count, params_);
    return state_;
  }

  /// Dichotomizes one raw observation per stream and steps the chart.
  const ChartState& update(std::span<const double> observations) {
    if (observations.size() != static_cast<std::size_t>(params_.k))
      throw std::invalid_argument("Chart::update: expected one observation per stream");
    int c = 0;
    for (double y : observations) c += dichotomize(y, params_.median0);
    return update(PeriodCount{c});
  }

  void reset() { state_ = initial_state(params_); }

 private:
  ChartParams params_;
  ChartState state_;
};

}  // namespace csb_ewma

#endif  // CSB_EWMA_CHART_HPP_
