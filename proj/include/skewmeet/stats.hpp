#pragma once
// Binomial intervals and small summary helpers used by the experiments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>

namespace skewmeet {

/// Two-sided 95% normal quantile.
inline constexpr double kZ95 = 1.959963984540054;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double half_width() const { return 0.5 * (hi - lo); }
};

/// Wilson score interval for k successes out of n trials.
inline Interval wilson_interval(std::uint64_t successes, std::uint64_t trials,
                                double z = kZ95) {
  if (trials == 0) throw std::invalid_argument("wilson_interval needs trials > 0");
  if (successes > trials) {
    throw std::invalid_argument("successes exceed trials");
  }
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double spread = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - spread), std::min(1.0, centre + spread)};
}

inline double binomial_stderr(double p, std::uint64_t trials) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

/**
 * Delta-method 95% interval for the ratio p1/p2 of two independent binomial
 * proportions, built on the log scale. Both proportions must be positive.
 */
inline Interval ratio_interval(std::uint64_t k1, std::uint64_t n1,
                               std::uint64_t k2, std::uint64_t n2,
                               double z = kZ95) {
  if (k1 == 0 || k2 == 0) {
    throw std::invalid_argument("ratio_interval needs positive counts");
  }
  const double p1 = static_cast<double>(k1) / static_cast<double>(n1);
  const double p2 = static_cast<double>(k2) / static_cast<double>(n2);
  const double var = (1.0 - p1) / static_cast<double>(k1) +
                     (1.0 - p2) / static_cast<double>(k2);
  const double centre = std::log(p1 / p2);
  const double spread = z * std::sqrt(var);
  return {std::exp(centre - spread), std::exp(centre + spread)};
}

/// Sample Pearson correlation of two equally long series.
inline double sample_correlation(std::span<const double> x,
                                 std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("sample_correlation needs two equal series");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace skewmeet
