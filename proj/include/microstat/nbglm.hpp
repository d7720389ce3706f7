#ifndef MICROSTAT_NBGLM_HPP
#define MICROSTAT_NBGLM_HPP

// Per-feature negative binomial GLM with a two-level group covariate:
// log mu_j = log d_j + b0 + b1 x_j. Dispersion by per-feature ML with
// coefficients profiled out (alternating IRLS and Newton), Wald test on
// b1, BH adjustment across features. No shrinkage.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "microstat/errors.hpp"
#include "microstat/nb.hpp"
#include "microstat/parallel.hpp"
#include "microstat/special.hpp"

namespace microstat {

struct WaldRow {
  std::string feature_id;
  double lfc = std::numeric_limits<double>::quiet_NaN();   // log2
  double lfcSE = std::numeric_limits<double>::quiet_NaN();
  double WTS = std::numeric_limits<double>::quiet_NaN();
  double pvalue = std::numeric_limits<double>::quiet_NaN();
  double p_adj = std::numeric_limits<double>::quiet_NaN();
  double base_mean = 0.0;
  double dispersion = std::numeric_limits<double>::quiet_NaN();
  bool na = false;        // all-zero feature, excluded from BH
  bool separated = false; // one group entirely zero; lfc clamped
};

namespace detail {

constexpr double kLfcClamp = 30.0; // |log2 fold change| ceiling
constexpr double kLn2 = 0.6931471805599453;

struct GlmFit {
  double b0 = 0.0, b1 = 0.0;
  double se1 = 0.0;
  double k = 10.0;
  bool separated = false;
};

// weighted 2x2 solve of the IRLS normal equations
inline void irls_step(std::span<const std::int64_t> y,
                      std::span<const double> offset,
                      std::span<const int> x, double k, double &b0,
                      double &b1, bool clamp) {
  for (int it = 0; it < 60; ++it) {
    double s_w = 0, s_wx = 0, s_wxx = 0, s_wz = 0, s_wxz = 0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double eta = offset[j] + b0 + b1 * x[j];
      const double mu = std::exp(std::clamp(eta, -300.0, 300.0));
      const double w = mu / (1.0 + mu / k);
      const double z =
          (b0 + b1 * x[j]) + (static_cast<double>(y[j]) - mu) / mu;
      s_w += w;
      s_wx += w * x[j];
      s_wxx += w * x[j] * x[j];
      s_wz += w * z;
      s_wxz += w * x[j] * z;
    }
    const double det = s_w * s_wxx - s_wx * s_wx;
    if (!(std::fabs(det) > 1e-300)) break;
    double nb0 = (s_wxx * s_wz - s_wx * s_wxz) / det;
    double nb1 = (s_w * s_wxz - s_wx * s_wz) / det;
    // damp oversized moves; the working response is linearized
    nb0 = b0 + std::clamp(nb0 - b0, -4.0, 4.0);
    nb1 = b1 + std::clamp(nb1 - b1, -4.0, 4.0);
    if (clamp) nb1 = std::clamp(nb1, -kLfcClamp * kLn2, kLfcClamp * kLn2);
    const double delta = std::max(std::fabs(nb0 - b0), std::fabs(nb1 - b1));
    b0 = nb0;
    b1 = nb1;
    if (delta < 1e-10) break;
  }
}

inline double glm_loglik_k_gradient(std::span<const std::int64_t> y,
                                    std::span<const double> offset,
                                    std::span<const int> x, double b0,
                                    double b1, double k, double &grad2) {
  double g = 0.0;
  grad2 = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double mu =
        std::exp(std::clamp(offset[j] + b0 + b1 * x[j], -300.0, 300.0));
    const double yj = static_cast<double>(y[j]);
    g += digamma(yj + k) - digamma(k) + std::log(k) + 1.0 -
         std::log(k + mu) - (k + yj) / (k + mu);
    grad2 += trigamma(yj + k) - trigamma(k) + 1.0 / k - 2.0 / (k + mu) +
             (k + yj) / ((k + mu) * (k + mu));
  }
  return g;
}

inline GlmFit fit_nb_glm(std::span<const std::int64_t> y,
                         std::span<const double> offset,
                         std::span<const int> x) {
  GlmFit fit;
  // separation check per group
  std::int64_t sum0 = 0, sum1 = 0;
  for (std::size_t j = 0; j < y.size(); ++j)
    (x[j] ? sum1 : sum0) += y[j];
  fit.separated = (sum0 == 0) != (sum1 == 0);

  // moment start for k on the offset-adjusted scale, coefficients from
  // the group means
  {
    double s = 0, s2 = 0, sum0 = 0, sum1 = 0, den0 = 0, den1 = 0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double v = static_cast<double>(y[j]) / std::exp(offset[j]);
      s += v;
      s2 += v * v;
      (x[j] ? sum1 : sum0) += v;
      (x[j] ? den1 : den0) += 1.0;
    }
    const double n = static_cast<double>(y.size());
    const double mean = s / n;
    const double var = (s2 - n * mean * mean) / std::max(1.0, n - 1.0);
    fit.k = (var > mean && mean > 0.0)
                ? std::clamp(mean * mean / (var - mean), 1e-2, 1e6)
                : 100.0;
    const double m0 = std::max(sum0 / den0, 0.5 / den0);
    const double m1 = std::max(sum1 / den1, 0.5 / den1);
    fit.b0 = std::log(m0);
    fit.b1 = std::clamp(std::log(m1 / m0), -kLfcClamp * kLn2,
                        kLfcClamp * kLn2);
  }

  double prev_b0 = 1e300, prev_b1 = 1e300, prev_k = 1e300;
  for (int outer = 0; outer < 50; ++outer) {
    irls_step(y, offset, x, fit.k, fit.b0, fit.b1, true);
    // Newton on log k with coefficients held fixed
    for (int it = 0; it < 40; ++it) {
      double h;
      const double g = glm_loglik_k_gradient(y, offset, x, fit.b0, fit.b1,
                                             fit.k, h);
      const double gt = g * fit.k;
      const double ht = h * fit.k * fit.k + g * fit.k;
      double step = (ht < 0.0) ? -gt / ht : (gt > 0.0 ? 0.5 : -0.5);
      step = std::clamp(step, -2.0, 2.0);
      fit.k *= std::exp(step);
      fit.k = std::clamp(fit.k, 1e-8, 1e10);
      if (std::fabs(step) < 1e-10 || fit.k >= 1e10) break;
    }
    const double delta = std::max({std::fabs(fit.b0 - prev_b0),
                                   std::fabs(fit.b1 - prev_b1),
                                   std::fabs(std::log(fit.k / prev_k))});
    prev_b0 = fit.b0;
    prev_b1 = fit.b1;
    prev_k = fit.k;
    if (delta < 1e-8) break;
  }

  // observed information for the standard error
  double i00 = 0, i01 = 0, i11 = 0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double mu =
        std::exp(std::clamp(offset[j] + fit.b0 + fit.b1 * x[j], -300.0,
                            300.0));
    const double yj = static_cast<double>(y[j]);
    double w = (yj + fit.k) * fit.k * mu / ((mu + fit.k) * (mu + fit.k));
    if (!(w > 0.0)) w = mu / (1.0 + mu / fit.k); // expected-info fallback
    i00 += w;
    i01 += w * x[j];
    i11 += w * x[j] * x[j];
  }
  const double det = i00 * i11 - i01 * i01;
  fit.se1 = det > 0.0 ? std::sqrt(i00 / det) : 1e6;
  fit.se1 = std::min(fit.se1, 1e6);
  return fit;
}

} // namespace detail

// Wald test for a 2-level design; one row per feature in input order.
// All-zero features are emitted with NA sentinels and excluded from the
// BH denominator.
inline std::vector<WaldRow> wald_test(
    const std::vector<std::int64_t> &counts, std::size_t n_features,
    const std::vector<std::string> &feature_ids,
    const std::vector<std::string> &groups,
    const std::vector<double> &size_factors) {
  const std::size_t n = groups.size();
  if (n_features == 0 || counts.size() != n_features * n)
    throw data_error("wald_test: shape mismatch");
  if (feature_ids.size() != n_features)
    throw data_error("wald_test: feature id count mismatch");
  if (size_factors.size() != n)
    throw data_error("wald_test: size factor length mismatch");
  for (double d : size_factors)
    if (!(d > 0.0)) throw data_error("wald_test: size factors must be > 0");

  // encode the two-level factor; the lexicographically first label is
  // the reference, so lfc is the second level against the first and
  // swapping the assignment negates it
  std::vector<std::string> levels;
  for (const auto &g : groups)
    if (std::find(levels.begin(), levels.end(), g) == levels.end())
      levels.push_back(g);
  if (levels.size() != 2)
    throw data_error("wald_test: exactly two group levels required, found " +
                     std::to_string(levels.size()));
  std::sort(levels.begin(), levels.end());
  std::vector<int> x(n);
  for (std::size_t j = 0; j < n; ++j) x[j] = groups[j] == levels[1] ? 1 : 0;
  {
    std::size_t n0 = 0, n1 = 0;
    for (int v : x) (v ? n1 : n0) += 1;
    if (n0 < 2 || n1 < 2)
      throw data_error("wald_test: each group needs at least 2 specimens");
  }

  std::vector<double> offset(n);
  for (std::size_t j = 0; j < n; ++j) offset[j] = std::log(size_factors[j]);

  std::vector<WaldRow> rows(n_features);
  parallel_for(n_features, [&](std::size_t f) {
    WaldRow row;
    row.feature_id = feature_ids[f];
    std::vector<std::int64_t> y(n);
    bool all_zero = true;
    double base = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = counts[f * n + j];
      if (y[j] < 0) throw data_error("wald_test: negative count");
      all_zero = all_zero && y[j] == 0;
      base += static_cast<double>(y[j]) / size_factors[j];
    }
    row.base_mean = base / static_cast<double>(n);
    if (all_zero) {
      row.na = true;
      rows[f] = row;
      return;
    }
    const auto fit = detail::fit_nb_glm(y, offset, x);
    row.separated = fit.separated;
    row.dispersion = fit.k;
    row.lfc = fit.b1 / detail::kLn2;
    row.lfcSE = fit.se1 / detail::kLn2;
    row.WTS = fit.se1 > 0.0 ? fit.b1 / fit.se1 : 0.0;
    row.pvalue = 2.0 * (1.0 - normal_cdf(std::fabs(row.WTS)));
    rows[f] = row;
  });

  std::vector<double> pvals(n_features,
                            std::numeric_limits<double>::quiet_NaN());
  for (std::size_t f = 0; f < n_features; ++f)
    if (!rows[f].na) pvals[f] = rows[f].pvalue;
  const auto adj = bh_adjust(pvals);
  for (std::size_t f = 0; f < n_features; ++f) rows[f].p_adj = adj[f];
  return rows;
}

inline std::vector<WaldRow> wald_test(const CountTable &ct,
                                      const std::vector<std::string> &groups,
                                      const std::vector<double> &size_factors) {
  return wald_test(ct.counts, ct.n_taxa(), ct.taxa_ids, groups, size_factors);
}

} // namespace microstat

#endif
