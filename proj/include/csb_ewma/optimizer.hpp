#ifndef CSB_EWMA_OPTIMIZER_HPP_
#define CSB_EWMA_OPTIMIZER_HPP_

// Calibration of (lambda, L) against a target in-control ARL, out-of-control
// ARL profiling, and the cross-distribution coefficient of variation.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "csb_ewma/chart.hpp"
#include "csb_ewma/distributions.hpp"
#include "csb_ewma/random.hpp"
#include "csb_ewma/simulation.hpp"

namespace csb_ewma {

struct GridSearchRow {
  double lambda = 0.0;
  double limit_multiplier = 0.0;
  double achieved_arl0 = 0.0;
  double se = 0.0;
  double target = 0.0;
  RunLengthSummary summary;
};

struct Arl1Cell {
  double lambda = 0.0;
  double limit_multiplier = 0.0;
  double delta = 0.0;
  Family family = Family::direct;
  double arl1 = 0.0;
  double se = 0.0;
  RunLengthSummary summary;
};

struct CvRow {
  double delta = 0.0;
  double mean_arl1 = 0.0;
  double sd_arl1 = 0.0;
  double cv = 0.0;
};

/// Inclusive arithmetic grid lo, lo+step, ..., hi, with values rounded to
/// 1e-9 so that e.g. 0.1 + 4 * 0.025 prints and compares as 0.2.
inline std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw std::invalid_argument("make_grid: need lo <= hi, step > 0");
  const auto n = static_cast<std::int64_t>(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  for (std::int64_t i = 0; i <= n; ++i)
    out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9);
  return out;
}

struct GridSearchOptions {
  int k = 10;
  double p0 = 0.5;
  SimulationOptions sim{10'000, kDefaultArl0Cap, 42, 0};
  bool exhaustive = false;     // evaluate every L instead of bisecting
  double bucket_width = 0.1;   // lambda buckets [0.1, 0.2), [0.2, 0.3), ...
};

/// Seed shared by every L evaluated at one lambda. With common random numbers
/// across L the estimated ARL0 is nondecreasing in L path by path (wider limits
/// can only delay the first exit), which is what makes bisection exact.
inline std::uint64_t lambda_cell_seed(std::uint64_t master, double lambda) {
  return derive_seed(master, {std::bit_cast<std::uint64_t>(lambda)});
}

/// Closest-to-target L on `limit_grid` (ascending) for one lambda. Ties go to
/// the smaller L. `evaluations`, when given, counts simulated cells.
inline GridSearchRow calibrate_lambda(double target_arl0, double lambda,
                                      const std::vector<double>& limit_grid,
                                      const GridSearchOptions& opt,
                                      std::size_t* evaluations = nullptr) {
  if (limit_grid.empty()) throw std::invalid_argument("calibrate_lambda: empty L grid");
  if (!(target_arl0 > 0.0)) throw std::invalid_argument("target ARL0 must be positive");
  if (!std::is_sorted(limit_grid.begin(), limit_grid.end()))
    throw std::invalid_argument("calibrate_lambda: L grid must be ascending");

  SimulationOptions sim = opt.sim;
  sim.seed = lambda_cell_seed(opt.sim.seed, lambda);
  const DistributionSpec in_control = calibrate_shift(Family::direct, 0.0, opt.p0);

  std::vector<std::optional<RunLengthSummary>> memo(limit_grid.size());
  auto eval = [&](std::size_t i) -> const RunLengthSummary& {
    if (!memo[i]) {
      ChartParams p;
      p.k = opt.k;
      p.lambda = lambda;
      p.limit_multiplier = limit_grid[i];
      p.p0 = opt.p0;
      memo[i] = estimate_arl(p, in_control, sim);
      if (evaluations) ++*evaluations;
    }
    return *memo[i];
  };
  auto distance = [&](std::size_t i) { return std::abs(eval(i).arl - target_arl0); };

  std::size_t best = 0;
  if (opt.exhaustive) {
    for (std::size_t i = 1; i < limit_grid.size(); ++i)
      if (distance(i) < distance(best)) best = i;
  } else {
    // First index with ARL0 >= target.
    std::size_t lo = 0, hi = limit_grid.size();
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (eval(mid).arl >= target_arl0) hi = mid; else lo = mid + 1;
    }
    if (lo == limit_grid.size()) {
      best = lo - 1;
    } else if (lo == 0 || distance(lo) < distance(lo - 1)) {
      best = lo;
    } else {
      best = lo - 1;
    }
    // Walk to the left end of a plateau of equal estimates so ties resolve to
    // the smallest L, as the exhaustive scan does.
    if (best < lo || lo == limit_grid.size()) {
      const double value = eval(best).arl;
      std::size_t a = 0, b = best;
      while (a < b) {
        const std::size_t mid = a + (b - a) / 2;
        if (eval(mid).arl >= value) b = mid; else a = mid + 1;
      }
      best = a;
    }
  }

  const RunLengthSummary& s = eval(best);
  return GridSearchRow{lambda, limit_grid[best], s.arl, s.se, target_arl0, s};
}

/// One calibrated row per lambda on the grid.
inline std::vector<GridSearchRow> calibrate_all(double target_arl0,
                                                const std::vector<double>& lambda_grid,
                                                const std::vector<double>& limit_grid,
                                                const GridSearchOptions& opt) {
  if (lambda_grid.empty()) throw std::invalid_argument("grid_search: empty lambda grid");
  std::vector<GridSearchRow> rows;
  rows.reserve(lambda_grid.size());
  for (double lambda : lambda_grid)
    rows.push_back(calibrate_lambda(target_arl0, lambda, limit_grid, opt));
  return rows;
}

/// Per lambda bucket, the calibrated (lambda, L) whose ARL0 is closest to the
/// target. Rows come out in ascending lambda order.
inline std::vector<GridSearchRow> select_per_bucket(const std::vector<GridSearchRow>& per_lambda,
                                                    double bucket_width) {
  std::map<std::int64_t, GridSearchRow> best;
  for (const auto& row : per_lambda) {
    const auto bucket = static_cast<std::int64_t>(std::floor(row.lambda / bucket_width + 1e-9));
    auto it = best.find(bucket);
    if (it == best.end() || std::abs(row.achieved_arl0 - row.target) <
                                std::abs(it->second.achieved_arl0 - it->second.target))
      best[bucket] = row;
  }
  std::vector<GridSearchRow> out;
  for (auto& [bucket, row] : best) out.push_back(row);
  return out;
}

inline std::vector<GridSearchRow> grid_search(double target_arl0,
                                              const std::vector<double>& lambda_grid,
                                              const std::vector<double>& limit_grid,
                                              const GridSearchOptions& opt) {
  return select_per_bucket(calibrate_all(target_arl0, lambda_grid, limit_grid, opt),
                           opt.bucket_width);
}

/// Sampling spec actually simulated for (family, delta). p1 = 1 cannot be
/// reached by a finite location shift for the unbounded families; since the
/// chart only sees indicators, such cells are drawn from the direct path.
inline DistributionSpec sampling_spec(Family family, double delta, double p0) {
  if (is_continuous(family) && family != Family::uniform && delta >= 1.0 - p0)
    return calibrate_shift(Family::direct, delta, p0);
  return calibrate_shift(family, delta, p0);
}

struct ProfileOptions {
  int k = 10;
  double p0 = 0.5;
  SimulationOptions sim{50'000, kDefaultArl1Cap, 42, 0};
  bool common_random_numbers = false;  // same stream for every family at a delta
};

/// Full factorial ARL1 table over (row, delta, family). Cells are seeded by
/// (row index, delta index, family index); with common_random_numbers the
/// family index is dropped.
inline std::vector<Arl1Cell> arl1_profile(const std::vector<GridSearchRow>& rows,
                                          const std::vector<double>& deltas,
                                          const std::vector<Family>& families,
                                          const ProfileOptions& opt) {
  std::vector<Arl1Cell> cells;
  cells.reserve(rows.size() * deltas.size() * families.size());
  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    ChartParams p;
    p.k = opt.k;
    p.lambda = rows[ri].lambda;
    p.limit_multiplier = rows[ri].limit_multiplier;
    p.p0 = opt.p0;
    for (std::size_t di = 0; di < deltas.size(); ++di) {
      for (std::size_t fi = 0; fi < families.size(); ++fi) {
        SimulationOptions sim = opt.sim;
        sim.seed = derive_seed(opt.sim.seed,
                               {ri, di, opt.common_random_numbers ? std::uint64_t{0} : fi});
        const RunLengthSummary s =
            estimate_arl(p, sampling_spec(families[fi], deltas[di], opt.p0), sim);
        cells.push_back(Arl1Cell{p.lambda, p.limit_multiplier, deltas[di], families[fi],
                                 s.arl, s.se, s});
      }
    }
  }
  return cells;
}

/// Coefficient of variation of ARL1 across the four continuous families, per
/// delta. The SD is the population SD over the four family values. When the
/// cells hold several (lambda, L) settings, the per-setting mean, SD and CV are
/// averaged. Direct-family cells are ignored.
inline std::vector<CvRow> cv_across_distributions(const std::vector<Arl1Cell>& cells) {
  using Setting = std::pair<double, double>;
  std::map<double, std::map<Setting, std::map<Family, double>>> grouped;
  for (const auto& c : cells) {
    if (!is_continuous(c.family)) continue;
    auto& slot = grouped[c.delta][{c.lambda, c.limit_multiplier}];
    if (slot.contains(c.family))
      throw std::invalid_argument("cv_across_distributions: duplicate family cell");
    slot[c.family] = c.arl1;
  }
  std::vector<CvRow> out;
  for (const auto& [delta, settings] : grouped) {
    CvRow row{delta, 0.0, 0.0, 0.0};
    for (const auto& [setting, by_family] : settings) {
      if (by_family.size() != kContinuousFamilies.size())
        throw std::invalid_argument("cv_across_distributions: delta " + std::to_string(delta) +
                                    " is missing a family");
      double mean = 0.0;
      for (const auto& [f, v] : by_family) mean += v;
      mean /= static_cast<double>(by_family.size());
      double ss = 0.0;
      for (const auto& [f, v] : by_family) ss += (v - mean) * (v - mean);
      const double sd = std::sqrt(ss / static_cast<double>(by_family.size()));
      row.mean_arl1 += mean;
      row.sd_arl1 += sd;
      row.cv += sd / mean;
    }
    const auto n = static_cast<double>(settings.size());
    row.mean_arl1 /= n;
    row.sd_arl1 /= n;
    row.cv /= n;
    out.push_back(row);
  }
  return out;
}

}  // namespace csb_ewma

#endif  // CSB_EWMA_OPTIMIZER_HPP_
