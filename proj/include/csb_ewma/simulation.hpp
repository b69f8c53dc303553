#ifndef CSB_EWMA_SIMULATION_HPP_
#define CSB_EWMA_SIMULATION_HPP_

// Monte Carlo run-length engine.
//
// Replication i draws from its own xoshiro256** stream seeded with
// derive_seed(master_seed, {i}), so results are a pure function of
// (master_seed, n_reps, chart parameters, sampling spec) and never of the
// number of worker threads. Run lengths are reduced in replication order.
//
// Zero-state convention: any shift is active from period 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "csb_ewma/chart.hpp"
#include "csb_ewma/distributions.hpp"
#include "csb_ewma/random.hpp"

namespace csb_ewma {

inline constexpr std::uint64_t kDefaultArl0Cap = 250'000;
inline constexpr std::uint64_t kDefaultArl1Cap = 50'000;

struct RunLengthSummary {
  double arl = 0.0;
  double sd = 0.0;
  double se = 0.0;
  std::uint64_t n_reps = 0;
  std::uint64_t cap = 0;
  std::uint64_t n_censored = 0;  // replications that reached the cap; counted as cap
  std::uint64_t seed = 0;

  friend bool operator==(const RunLengthSummary&, const RunLengthSummary&) = default;
};

struct SimulationOptions {
  std::uint64_t n_reps = 10'000;
  std::uint64_t cap = kDefaultArl0Cap;
  std::uint64_t seed = 42;
  unsigned workers = 0;  // 0: one per hardware thread
};

/// Draws per-period counts for one sampling spec.
class PeriodSampler {
 public:
  PeriodSampler(const DistributionSpec& spec, int k)
      : spec_(spec), k_(k), binomial_(k, spec.p1), uniforms_(static_cast<std::size_t>(k)) {}

  template <class Rng>
  int operator()(Rng& rng) {
    if (spec_.family == Family::direct) return binomial_(rng.uniform());
    for (double& u : uniforms_) u = rng.uniform();
    return sample_period(spec_, k_, uniforms_).c;
  }

 private:
  DistributionSpec spec_;
  int k_;
  BinomialSampler binomial_;
  std::vector<double> uniforms_;
};

/// Per-period quantities that do not depend on the data: sd of Q_t and the
/// control limits. Filled by the same recurrences `step` uses, so a run over
/// the schedule signals at exactly the period a stepped ChartState would.
class LimitSchedule {
 public:
  LimitSchedule(const ChartParams& params, std::uint64_t horizon)
      : q_sd_(horizon + 1), lcl_(horizon + 1), ucl_(horizon + 1) {
    ChartState s = initial_state(params);
    for (std::uint64_t t = 1; t <= horizon; ++t) {
      const VarianceStep v = variance_step(s, params.lambda);
      s.t = t;
      s.var_r = v.var_r;
      s.cross_acc = v.cross_acc;
      s.decay_pow *= (1.0 - params.lambda);
      const ControlLimits lim =
          control_limits_about(s.decay_pow * params.r0, s.var_r, params.limit_multiplier);
      q_sd_[t] = detail::standard_deviation_of_q(params.k, params.p0, t);
      lcl_[t] = lim.lcl;
      ucl_[t] = lim.ucl;
    }
  }

  std::uint64_t horizon() const noexcept { return q_sd_.size() - 1; }
  double q_sd(std::uint64_t t) const { return q_sd_[t]; }
  double lcl(std::uint64_t t) const { return lcl_[t]; }
  double ucl(std::uint64_t t) const { return ucl_[t]; }

 private:
  std::vector<double> q_sd_;
  std::vector<double> lcl_;
  std::vector<double> ucl_;
};

/// First period at which r_t leaves [LCL_t, UCL_t], or `cap` if it never does.
/// Reference path: steps a full ChartState.
template <class Rng>
std::uint64_t run_length(const ChartParams& params, const DistributionSpec& spec, Rng& rng,
                         std::uint64_t cap) {
  if (cap < 1) throw std::invalid_argument("run_length: cap must be >= 1");
  params.validate();
  PeriodSampler sampler(spec, params.k);
  ChartState s = initial_state(params);
  while (s.t < cap) {
    s = step(s, PeriodCount{sampler(rng)}, params);
    if (s.signaled) return s.t;
  }
  return cap;
}

namespace detail {

/// Hot loop over a precomputed schedule; same arithmetic as `step`.
template <class Rng>
std::uint64_t run_length_scheduled(const ChartParams& params, const LimitSchedule& schedule,
                                   PeriodSampler& sampler, Rng& rng) {
  const std::uint64_t cap = schedule.horizon();
  const double mean_per_period = static_cast<double>(params.k) * params.p0;
  const double lambda = params.lambda;
  std::uint64_t q = 0;
  double r = params.r0;
  for (std::uint64_t t = 1; t <= cap; ++t) {
    q += static_cast<std::uint64_t>(sampler(rng));
    const double w =
        (static_cast<double>(q) - mean_per_period * static_cast<double>(t)) / schedule.q_sd(t);
    r = ewma_update(r, w, lambda);
    if (r > schedule.ucl(t) || r < schedule.lcl(t)) return t;
  }
  return cap;
}

inline unsigned resolve_workers(unsigned requested, std::uint64_t jobs) {
  unsigned w = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (jobs < w) w = static_cast<unsigned>(std::max<std::uint64_t>(jobs, 1));
  return w;
}

/// Runs body(i) for i in [0, n) over contiguous chunks on `workers` threads.
inline void parallel_for(std::uint64_t n, unsigned workers,
                         const std::function<void(std::uint64_t begin, std::uint64_t end)>& body) {
  workers = resolve_workers(workers, n);
  if (workers <= 1) {
    body(0, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const std::uint64_t begin = n * w / workers;
    const std::uint64_t end = n * (w + 1) / workers;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
}

}  // namespace detail

inline RunLengthSummary summarize_run_lengths(std::span<const std::uint64_t> lengths,
                                              std::uint64_t cap, std::uint64_t seed) {
  RunLengthSummary out;
  out.n_reps = lengths.size();
  out.cap = cap;
  out.seed = seed;
  if (lengths.empty()) return out;
  double sum = 0.0;
  for (std::uint64_t x : lengths) {
    sum += static_cast<double>(x);
    if (x >= cap) ++out.n_censored;
  }
  out.arl = sum / static_cast<double>(lengths.size());
  if (lengths.size() > 1) {
    double ss = 0.0;
    for (std::uint64_t x : lengths) {
      const double d = static_cast<double>(x) - out.arl;
      ss += d * d;
    }
    out.sd = std::sqrt(ss / static_cast<double>(lengths.size() - 1));
  }
  out.se = out.sd / std::sqrt(static_cast<double>(lengths.size()));
  return out;
}

/// All n_reps run lengths, in replication order.
inline std::vector<std::uint64_t> simulate_run_lengths(const ChartParams& params,
                                                       const DistributionSpec& spec,
                                                       const SimulationOptions& opt) {
  params.validate();
  if (opt.n_reps < 1) throw std::invalid_argument("n_reps must be >= 1");
  if (opt.cap < 1) throw std::invalid_argument("cap must be >= 1");
  const LimitSchedule schedule(params, opt.cap);
  std::vector<std::uint64_t> lengths(opt.n_reps);
  detail::parallel_for(opt.n_reps, opt.workers, [&](std::uint64_t begin, std::uint64_t end) {
    PeriodSampler sampler(spec, params.k);
    for (std::uint64_t i = begin; i < end; ++i) {
      Xoshiro256 rng(derive_seed(opt.seed, {i}));
      lengths[i] = detail::run_length_scheduled(params, schedule, sampler, rng);
    }
  });
  return lengths;
}

inline RunLengthSummary estimate_arl(const ChartParams& params, const DistributionSpec& spec,
                                     const SimulationOptions& opt) {
  const auto lengths = simulate_run_lengths(params, spec, opt);
  return summarize_run_lengths(lengths, opt.cap, opt.seed);
}

inline RunLengthSummary estimate_arl(const ChartParams& params, const ShiftScenario& scenario,
                                     Family family, const SimulationOptions& opt) {
  return estimate_arl(params, calibrate_shift(family, scenario.delta, params.p0), opt);
}

/// Uncapped chart trajectories observed at fixed periods (no stopping on
/// signals). r[c][i] and w[c][i] hold r_t and W_t for checkpoint c,
/// replication i. Used to check the exact mean and variance of r_t.
struct PathSample {
  std::vector<std::uint64_t> checkpoints;
  std::vector<std::vector<double>> r;
  std::vector<std::vector<double>> w;
};

inline PathSample sample_paths(const ChartParams& params, const DistributionSpec& spec,
                               std::vector<std::uint64_t> checkpoints, std::uint64_t n_reps,
                               std::uint64_t seed, unsigned workers = 0) {
  params.validate();
  std::sort(checkpoints.begin(), checkpoints.end());
  if (checkpoints.empty() || checkpoints.front() < 1)
    throw std::invalid_argument("sample_paths: checkpoints must be >= 1");
  PathSample out;
  out.checkpoints = checkpoints;
  out.r.assign(checkpoints.size(), std::vector<double>(n_reps));
  out.w.assign(checkpoints.size(), std::vector<double>(n_reps));
  const std::uint64_t horizon = checkpoints.back();
  detail::parallel_for(n_reps, workers, [&](std::uint64_t begin, std::uint64_t end) {
    PeriodSampler sampler(spec, params.k);
    for (std::uint64_t i = begin; i < end; ++i) {
      Xoshiro256 rng(derive_seed(seed, {i}));
      ChartState s = initial_state(params);
      std::size_t next = 0;
      while (s.t < horizon) {
        s = step(s, PeriodCount{sampler(rng)}, params);
        while (next < checkpoints.size() && checkpoints[next] == s.t) {
          out.r[next][i] = s.r;
          out.w[next][i] = s.w;
          ++next;
        }
      }
    }
  });
  return out;
}

}  // namespace csb_ewma

#endif  // CSB_EWMA_SIMULATION_HPP_
