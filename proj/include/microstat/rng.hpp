#ifndef MICROSTAT_RNG_HPP
#define MICROSTAT_RNG_HPP

// Reproducible random number generation. Every stochastic routine in the
// library draws from Pcg32 (PCG-XSH-RR 64/32) through the samplers below,
// never through <random> distributions, whose output is implementation
// defined. Substreams are derived from (seed, stream id) with splitmix64,
// so parallel workers get independent, reproducible generators.

#include <cmath>
#include <cstdint>
#include <vector>

#include "microstat/errors.hpp"

namespace microstat {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// 64-bit key for worker `stream` of a run keyed by `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 1));
}

class Pcg32 {
public:
  Pcg32() : Pcg32(0x853C49E6748FEA9BULL, 0xDA3E39CB94B95BDBULL) {}

  Pcg32(std::uint64_t seed, std::uint64_t seq) {
    state_ = 0u;
    inc_ = (seq << 1) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  // Generator for worker `stream` of a run keyed by `seed`. Distinct
  // (seed, stream) pairs give distinct, uncorrelated sequences.
  static Pcg32 substream(std::uint64_t seed, std::uint64_t stream) {
    const std::uint64_t s = derive_seed(seed, stream);
    return Pcg32(s, splitmix64(s));
  }

  std::uint32_t next_u32() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const auto xorshifted =
        static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform on [0,1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n) by rejection; unbiased.
  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

private:
  std::uint64_t state_;
  std::uint64_t inc_;
};

inline double runif(Pcg32 &g) { return g.next_double(); }

// Strictly positive uniform, for logs.
inline double runif_pos(Pcg32 &g) {
  for (;;) {
    const double u = g.next_double();
    if (u > 0.0) return u;
  }
}

inline double rnorm(Pcg32 &g) {
  // Marsaglia polar method.
  for (;;) {
    const double u = 2.0 * g.next_double() - 1.0;
    const double v = 2.0 * g.next_double() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

inline double rnorm(Pcg32 &g, double mean, double sd) {
  return mean + sd * rnorm(g);
}

// Gamma(shape, rate) by Marsaglia-Tsang; shape < 1 handled by boosting.
inline double rgamma(Pcg32 &g, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw numeric_error("rgamma: shape and rate must be positive");
  if (shape < 1.0) {
    const double u = runif_pos(g);
    return rgamma(g, shape + 1.0, rate) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rnorm(g);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = runif_pos(g);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return d * v / rate;
  }
}

namespace detail {

inline std::int64_t rpois_small(Pcg32 &g, double lambda) {
  // Knuth inversion by products; expected O(lambda).
  const double l = std::exp(-lambda);
  std::int64_t k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= g.next_double();
  } while (p > l);
  return k - 1;
}

inline std::int64_t rpois_ptrs(Pcg32 &g, double lambda) {
  // Hormann (1993) transformed rejection, valid for lambda >= 10.
  const double b = 0.931 + 2.53 * std::sqrt(lambda);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_lambda = std::log(lambda);
  for (;;) {
    const double u = g.next_double() - 0.5;
    const double v = g.next_double();
    const double us = 0.5 - std::fabs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    const auto k = static_cast<std::int64_t>(kf);
    const double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
    const double rhs =
        kf * log_lambda - lambda - std::lgamma(kf + 1.0);
    if (lhs <= rhs) return k;
  }
}

} // namespace detail

inline std::int64_t rpois(Pcg32 &g, double lambda) {
  if (lambda < 0.0 || !std::isfinite(lambda))
    throw numeric_error("rpois: invalid mean");
  if (lambda == 0.0) return 0;
  if (lambda < 10.0) return detail::rpois_small(g, lambda);
  return detail::rpois_ptrs(g, lambda);
}

namespace detail {

inline std::int64_t rbinom_inversion(Pcg32 &g, std::int64_t n, double p) {
  // CDF walk with the pmf ratio recurrence; expected O(n p).
  const double q = 1.0 - p;
  const double s = p / q;
  double f = std::pow(q, static_cast<double>(n));
  double u = g.next_double();
  std::int64_t k = 0;
  for (;;) {
    if (u <= f) return k;
    u -= f;
    ++k;
    if (k > n) return n; // guards rounding in the final term
    f *= s * static_cast<double>(n - k + 1) / static_cast<double>(k);
  }
}

inline std::int64_t rbinom_btrs(Pcg32 &g, std::int64_t n, double p) {
  // Hormann (1993) BTRS, valid for n*p >= 10 with p <= 1/2.
  const double nd = static_cast<double>(n);
  const double q = 1.0 - p;
  const double stddev = std::sqrt(nd * p * q);
  const double b = 1.15 + 2.53 * stddev;
  const double a = -0.0873 + 0.0248 * b + 0.01 * p;
  const double c = nd * p + 0.5;
  const double v_r = 0.92 - 4.2 / b;
  const double alpha = (2.83 + 5.1 / b) * stddev;
  const double lpq = std::log(p / q);
  const double m = std::floor((nd + 1.0) * p);
  const double h = std::lgamma(m + 1.0) + std::lgamma(nd - m + 1.0);
  for (;;) {
    const double u = g.next_double() - 0.5;
    const double v = g.next_double();
    const double us = 0.5 - std::fabs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + c);
    if (kf < 0.0 || kf > nd) continue;
    if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(kf);
    const double lhs = std::log(v * alpha / (a / (us * us) + b));
    const double rhs = h - std::lgamma(kf + 1.0) - std::lgamma(nd - kf + 1.0) +
                       (kf - m) * lpq;
    if (lhs <= rhs) return static_cast<std::int64_t>(kf);
  }
}

} // namespace detail

inline std::int64_t rbinom(Pcg32 &g, std::int64_t n, double p) {
  if (n < 0 || p < 0.0 || p > 1.0 || !std::isfinite(p))
    throw numeric_error("rbinom: invalid parameters");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  if (p > 0.5) return n - rbinom(g, n, 1.0 - p);
  if (static_cast<double>(n) * p < 10.0)
    return detail::rbinom_inversion(g, n, p);
  return detail::rbinom_btrs(g, n, p);
}

// Negative binomial with mean mu and dispersion k (variance mu + mu^2/k),
// drawn through the gamma-Poisson mixture.
inline std::int64_t rnbinom_mu(Pcg32 &g, double mu, double k) {
  if (!(mu >= 0.0) || !(k > 0.0))
    throw numeric_error("rnbinom_mu: invalid parameters");
  if (mu == 0.0) return 0;
  return rpois(g, rgamma(g, k, k / mu));
}

// Multinomial by the conditional binomial method; deterministic order.
inline std::vector<std::int64_t> rmultinom(Pcg32 &g, std::int64_t n,
                                           const std::vector<double> &prob) {
  std::vector<std::int64_t> out(prob.size(), 0);
  double rest = 0.0;
  for (double p : prob) rest += p;
  std::int64_t left = n;
  for (std::size_t i = 0; i + 1 < prob.size() && left > 0; ++i) {
    const double p = prob[i] / rest;
    const std::int64_t k = rbinom(g, left, p < 1.0 ? p : 1.0);
    out[i] = k;
    left -= k;
    rest -= prob[i];
    if (rest <= 0.0) break;
  }
  if (!prob.empty()) out.back() += left;
  return out;
}

inline std::vector<double> rdirichlet(Pcg32 &g,
                                      const std::vector<double> &alpha) {
  std::vector<double> out(alpha.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    out[i] = rgamma(g, alpha[i], 1.0);
    sum += out[i];
  }
  for (double &v : out) v /= sum;
  return out;
}

// Draw an index proportional to the (non-negative) weights.
inline std::size_t sample_index(Pcg32 &g, const std::vector<double> &w) {
  double total = 0.0;
  for (double x : w) total += x;
  double u = g.next_double() * total;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    u -= w[i];
    if (u < 0.0) return i;
  }
  return w.empty() ? 0 : w.size() - 1;
}

template <typename T>
inline void shuffle(Pcg32 &g, std::vector<T> &v) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(g.bounded(i));
    std::swap(v[i - 1], v[j]);
  }
}

} // namespace microstat

#endif
