#ifndef CSB_EWMA_VALIDATION_HPP_
#define CSB_EWMA_VALIDATION_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "csb_ewma/chart.hpp"
#include "csb_ewma/distributions.hpp"
#include "csb_ewma/simulation.hpp"

namespace csb_ewma {

struct VarianceSweep {
  double lambda = 0.0;
  std::uint64_t t_max = 0;
  double max_rel_error = 0.0;  // incremental vs direct double sum
  bool bound_ok = true;        // Var(r_t) <= (1 - (1-lambda)^t)^2 < 1 at every t
  double last_incremental = 0.0;
  double last_direct = 0.0;
};

/// Steps the O(1) recurrence to t_max and compares it with the direct double
/// sum at every t.
inline VarianceSweep sweep_variance(double lambda, std::uint64_t t_max) {
  VarianceSweep out;
  out.lambda = lambda;
  out.t_max = t_max;
  ChartState s;
  for (std::uint64_t t = 1; t <= t_max; ++t) {
    const VarianceStep v = variance_step(s, lambda);
    s.t = t;
    s.var_r = v.var_r;
    s.cross_acc = v.cross_acc;
    const double direct = variance_exact_direct(lambda, t);
    out.max_rel_error = std::max(out.max_rel_error, std::abs(s.var_r - direct) / direct);
    const double bound = std::pow(1.0 - std::pow(1.0 - lambda, static_cast<double>(t)), 2.0);
    if (!(direct <= bound * (1.0 + 1e-12)) || !(direct < 1.0 || lambda == 1.0) ||
        !(s.var_r <= bound * (1.0 + 1e-12)))
      out.bound_ok = false;
    out.last_incremental = s.var_r;
    out.last_direct = direct;
  }
  return out;
}

struct MomentCheck {
  std::uint64_t t = 0;
  double exact_var = 0.0;
  double empirical_var = 0.0;
  double rel_error = 0.0;
  double mean = 0.0;
  double mean_se = 0.0;
  double expected_mean = 0.0;  // (1-lambda)^t r0
};

/// Empirical mean and variance of r_t over in-control replications against
/// the exact moments.
inline std::vector<MomentCheck> monte_carlo_moments(const ChartParams& params,
                                                    const std::vector<std::uint64_t>& checkpoints,
                                                    std::uint64_t n_reps, std::uint64_t seed,
                                                    unsigned workers = 0) {
  const DistributionSpec spec = calibrate_shift(Family::direct, 0.0, params.p0);
  const PathSample paths = sample_paths(params, spec, checkpoints, n_reps, seed, workers);
  std::vector<MomentCheck> out;
  for (std::size_t c = 0; c < paths.checkpoints.size(); ++c) {
    const auto& r = paths.r[c];
    double mean = 0.0;
    for (double x : r) mean += x;
    mean /= static_cast<double>(r.size());
    double ss = 0.0;
    for (double x : r) ss += (x - mean) * (x - mean);
    const double var = ss / static_cast<double>(r.size() - 1);
    MomentCheck m;
    m.t = paths.checkpoints[c];
    m.exact_var = variance_exact_direct(params.lambda, m.t);
    m.empirical_var = var;
    m.rel_error = std::abs(var - m.exact_var) / m.exact_var;
    m.mean = mean;
    m.mean_se = std::sqrt(var / static_cast<double>(r.size()));
    m.expected_mean = std::pow(1.0 - params.lambda, static_cast<double>(m.t)) * params.r0;
    out.push_back(m);
  }
  return out;
}

}  // namespace csb_ewma

#endif  // CSB_EWMA_VALIDATION_HPP_
