#ifndef CSB_EWMA_DISTRIBUTIONS_HPP_
#define CSB_EWMA_DISTRIBUTIONS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>

#include "csb_ewma/chart.hpp"

namespace csb_ewma {

enum class Family { normal, laplace, uniform, exponential, direct };

inline constexpr std::array<Family, 4> kContinuousFamilies = {
    Family::normal, Family::laplace, Family::uniform, Family::exponential};

inline constexpr std::string_view to_string(Family f) {
  switch (f) {
    case Family::normal: return "normal";
    case Family::laplace: return "laplace";
    case Family::uniform: return "uniform";
    case Family::exponential: return "exponential";
    case Family::direct: return "direct";
  }
  return "?";
}

inline Family parse_family(std::string_view token) {
  for (Family f : {Family::normal, Family::laplace, Family::uniform, Family::exponential,
                   Family::direct}) {
    if (token == to_string(f)) return f;
  }
  throw std::invalid_argument("unknown family '" + std::string(token) +
                              "' (expected normal, laplace, uniform, exponential or direct)");
}

inline constexpr bool is_continuous(Family f) { return f != Family::direct; }

/// Sustained upward shift of the exceedance probability, p1 = p0 + delta.
struct ShiftScenario {
  double delta = 0.0;
  double p1 = 0.5;

  static ShiftScenario make(double delta, double p0 = 0.5) {
    if (!(p0 > 0.0 && p0 < 1.0)) throw std::invalid_argument("p0 must lie in (0, 1)");
    if (!(delta >= 0.0 && delta <= 1.0 - p0))
      throw std::invalid_argument("delta must lie in [0, 1 - p0]");
    return ShiftScenario{delta, p0 + delta};
  }
};

struct DistributionSpec {
  Family family = Family::direct;
  double location_shift = 0.0;
  double p1 = 0.5;
  double median0 = 0.0;  // in-control median of the family's canonical form
};

/// Canonical in-control parameterizations: standard normal, Laplace(0, 1),
/// Uniform(0, 1), Exponential(rate 1).
inline double in_control_median(Family f) {
  switch (f) {
    case Family::uniform: return 0.5;
    case Family::exponential: return std::log(2.0);
    default: return 0.0;
  }
}

/// In-control quantile function F^{-1}(u) for u in (0, 1).
inline double quantile(Family f, double u) {
  switch (f) {
    case Family::normal:
      return boost::math::quantile(boost::math::normal_distribution<double>(), u);
    case Family::laplace:
      return u < 0.5 ? std::log(2.0 * u) : -std::log(2.0 - 2.0 * u);
    case Family::uniform:
      return u;
    case Family::exponential:
      return -std::log1p(-u);
    case Family::direct:
      break;
  }
  throw std::invalid_argument("quantile: the direct family has no continuous form");
}

/// Location shift s with P(Y + s >= median0) = p0 + delta for Y drawn from the
/// family's in-control form. Continuous families assume p0 = 0.5.
inline DistributionSpec calibrate_shift(Family family, double delta, double p0 = 0.5) {
  const ShiftScenario scenario = ShiftScenario::make(delta, p0);
  DistributionSpec spec;
  spec.family = family;
  spec.p1 = scenario.p1;
  spec.median0 = in_control_median(family);
  if (family == Family::direct) return spec;

  if (p0 != 0.5)
    throw std::invalid_argument("continuous families are calibrated for p0 = 0.5 only; "
                                "use the direct family for other p0");
  if (delta >= 0.5 && family != Family::uniform)
    throw std::invalid_argument("delta = 0.5 needs an infinite shift for the " +
                                std::string(to_string(family)) +
                                " family; use the direct family for p1 = 1");
  if (delta == 0.0) return spec;

  switch (family) {
    case Family::normal:
      spec.location_shift =
          boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + delta);
      break;
    case Family::laplace:
      spec.location_shift = -std::log(1.0 - 2.0 * delta);
      break;
    case Family::uniform:
      spec.location_shift = delta;
      break;
    case Family::exponential:
      spec.location_shift = std::log1p(2.0 * delta);
      break;
    case Family::direct:
      break;
  }
  return spec;
}

/// Maps one uniform to a stream indicator under `spec`.
inline int sample_indicator(const DistributionSpec& spec, double u) {
  if (spec.family == Family::direct) return u >= 1.0 - spec.p1 ? 1 : 0;
  return quantile(spec.family, u) + spec.location_shift >= spec.median0 ? 1 : 0;
}

/// One period of k streams by inverse-CDF sampling from caller-supplied
/// uniforms. For the direct family the count is the number of u >= 1 - p1,
/// itself a Binomial(k, p1) draw.
inline PeriodCount sample_period(const DistributionSpec& spec, int k,
                                 std::span<const double> uniforms) {
  if (uniforms.size() != static_cast<std::size_t>(k))
    throw std::invalid_argument("sample_period: need exactly k uniforms");
  int c = 0;
  for (double u : uniforms) c += sample_indicator(spec, u);
  return PeriodCount{c};
}

/// Binomial(k, p) by inversion of a precomputed CDF: one uniform per draw.
class BinomialSampler {
 public:
  BinomialSampler(int k, double p) {
    if (k < 1) throw std::invalid_argument("BinomialSampler: k must be >= 1");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("BinomialSampler: p outside [0, 1]");
    cdf_.resize(static_cast<std::size_t>(k) + 1);
    const boost::math::binomial_distribution<double> dist(k, p);
    double acc = 0.0;
    for (int c = 0; c <= k; ++c) {
      acc += boost::math::pdf(dist, c);
      cdf_[static_cast<std::size_t>(c)] = acc;
    }
    cdf_.back() = 1.0;
  }

  int operator()(double u) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end() - 1, u);
    return static_cast<int>(it - cdf_.begin());
  }

  std::span<const double> cdf() const noexcept { return cdf_; }

 private:
  std::vector<double> cdf_;
};

}  // namespace csb_ewma

#endif  // CSB_EWMA_DISTRIBUTIONS_HPP_
