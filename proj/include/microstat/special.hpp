#ifndef MICROSTAT_SPECIAL_HPP
#define MICROSTAT_SPECIAL_HPP

#include <cmath>
#include <cstdint>
#include <limits>

#include "microstat/errors.hpp"

namespace microstat {

inline double digamma(double x) {
  // Recurrence up to x >= 12, then the asymptotic series.
  double acc = 0.0;
  while (x < 12.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  return acc + std::log(x) - 0.5 * inv -
         inv2 * (1.0 / 12.0 -
                 inv2 * (1.0 / 120.0 -
                         inv2 * (1.0 / 252.0 -
                                 inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
}

inline double trigamma(double x) {
  double acc = 0.0;
  while (x < 12.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  return acc +
         inv * (1.0 +
                inv * (0.5 +
                       inv * (1.0 / 6.0 -
                              inv2 * (1.0 / 30.0 -
                                      inv2 * (1.0 / 42.0 -
                                              inv2 * (1.0 / 30.0 -
                                                      inv2 * (5.0 / 66.0)))))));
}

inline double log_poisson_pmf(std::int64_t k, double lambda) {
  if (k < 0) return -std::numeric_limits<double>::infinity();
  if (lambda == 0.0)
    return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  const double kd = static_cast<double>(k);
  return kd * std::log(lambda) - lambda - std::lgamma(kd + 1.0);
}

// NB pmf with mean mu and dispersion k: variance mu + mu^2/k.
inline double log_nb_pmf(std::int64_t x, double mu, double k) {
  if (x < 0) return -std::numeric_limits<double>::infinity();
  const double xd = static_cast<double>(x);
  return std::lgamma(xd + k) - std::lgamma(k) - std::lgamma(xd + 1.0) +
         k * std::log(k / (k + mu)) + xd * std::log(mu / (mu + k));
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Acklam's rational approximation of the standard normal quantile,
// refined with one Halley step; good to ~1e-15 over (0,1).
inline double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0))
    throw numeric_error("normal_quantile: p must be in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
          c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against the exact CDF.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

} // namespace microstat

#endif
