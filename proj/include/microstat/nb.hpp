#ifndef MICROSTAT_NB_HPP
#define MICROSTAT_NB_HPP

// Negative binomial fitting (variance = mu + mu^2/k) and the bootstrap
// chi-square goodness-of-fit test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "microstat/dataset.hpp"
#include "microstat/errors.hpp"
#include "microstat/parallel.hpp"
#include "microstat/rng.hpp"
#include "microstat/special.hpp"

namespace microstat {

struct NBParams {
  double mu = 0.0;
  double k = 0.0; // dispersion/exponent: variance = mu + mu^2/k
};

struct NBFit {
  NBParams params;
  bool converged = false; // false: method-of-moments fallback was returned
  int iterations = 0;
  double log_likelihood = 0.0;
};

namespace detail {

constexpr double kMaxDispersion = 1e10;

inline double nb_loglik(std::span<const std::int64_t> y,
                        std::span<const double> d, double mu, double k) {
  double ll = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j)
    ll += log_nb_pmf(y[j], mu * d[j], k);
  return ll;
}

// Profile solve for mu given k: Newton on log(mu).
inline double nb_solve_mu(std::span<const std::int64_t> y,
                          std::span<const double> d, double k, double mu0) {
  double mu = mu0;
  for (int it = 0; it < 80; ++it) {
    double g = 0.0, h = 0.0; // dl/dmu, d2l/dmu2
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double yj = static_cast<double>(y[j]);
      const double mj = mu * d[j];
      g += yj / mu - (k + yj) * d[j] / (k + mj);
      h += -yj / (mu * mu) + (k + yj) * d[j] * d[j] / ((k + mj) * (k + mj));
    }
    // Newton in theta = log mu
    const double gt = g * mu;
    const double ht = h * mu * mu + g * mu;
    double step = (ht < 0.0) ? -gt / ht : (gt > 0.0 ? 0.5 : -0.5);
    step = std::clamp(step, -2.0, 2.0);
    mu *= std::exp(step);
    if (std::fabs(step) < 1e-13) break;
  }
  return mu;
}

struct NBGrad {
  double dmu = 0.0;
  double dk = 0.0;
  double dk2 = 0.0;
};

inline NBGrad nb_gradients(std::span<const std::int64_t> y,
                           std::span<const double> d, double mu, double k) {
  NBGrad g;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double yj = static_cast<double>(y[j]);
    const double mj = mu * d[j];
    g.dmu += yj / mu - (k + yj) * d[j] / (k + mj);
    g.dk += digamma(yj + k) - digamma(k) + std::log(k) + 1.0 -
            std::log(k + mj) - (k + yj) / (k + mj);
    g.dk2 += trigamma(yj + k) - trigamma(k) + 1.0 / k - 2.0 / (k + mj) +
             (k + yj) / ((k + mj) * (k + mj));
  }
  return g;
}

inline NBParams nb_method_of_moments(std::span<const std::int64_t> y,
                                     std::span<const double> d) {
  double sy = 0.0, sd = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    sy += static_cast<double>(y[j]);
    sd += d[j];
  }
  const double mu = sy / sd;
  double var = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double r = static_cast<double>(y[j]) / d[j] - mu;
    var += r * r;
  }
  var /= std::max<double>(1.0, static_cast<double>(y.size()) - 1.0);
  double k = kMaxDispersion;
  if (var > mu) k = std::clamp(mu * mu / (var - mu), 1e-3, kMaxDispersion);
  return {mu, k};
}

} // namespace detail

// Maximum-likelihood NB fit for K_j ~ NB(mu * d_j, k): Newton iteration on
// log k with mu profiled out at every step. Falls back to method of
// moments (converged = false) after 100 iterations.
inline NBFit fit_nb(std::span<const std::int64_t> counts,
                    std::span<const double> size_factors) {
  if (counts.size() < 3)
    throw data_error("fit_nb: need at least 3 observations");
  if (counts.size() != size_factors.size())
    throw data_error("fit_nb: size factor length mismatch");
  bool all_zero = true;
  for (auto v : counts) {
    if (v < 0) throw data_error("fit_nb: negative count");
    if (v > 0) all_zero = false;
  }
  if (all_zero) throw data_error("fit_nb: all counts are zero");
  for (double d : size_factors)
    if (!(d > 0.0)) throw data_error("fit_nb: size factors must be positive");

  const NBParams mom = detail::nb_method_of_moments(counts, size_factors);
  double mu = mom.mu;
  double k = std::clamp(mom.k, 1e-2, 1e6); // interior start
  NBFit fit;
  for (int it = 1; it <= 100; ++it) {
    fit.iterations = it;
    mu = detail::nb_solve_mu(counts, size_factors, k, mu);
    const auto g = detail::nb_gradients(counts, size_factors, mu, k);
    if (std::max(std::fabs(g.dmu), std::fabs(g.dk)) < 1e-8) {
      fit.converged = true;
      break;
    }
    // Newton in theta = log k
    const double gt = g.dk * k;
    const double ht = g.dk2 * k * k + g.dk * k;
    double step = (ht < 0.0) ? -gt / ht : (gt > 0.0 ? 0.5 : -0.5);
    step = std::clamp(step, -2.0, 2.0);
    k *= std::exp(step);
    if (k >= detail::kMaxDispersion) {
      // Poisson limit: the k-gradient vanishes as k grows
      k = detail::kMaxDispersion;
      mu = detail::nb_solve_mu(counts, size_factors, k, mu);
      fit.converged = true;
      break;
    }
    if (k < 1e-8) k = 1e-8;
  }
  if (!fit.converged) {
    fit.params = detail::nb_method_of_moments(counts, size_factors);
    fit.params.mu = detail::nb_solve_mu(counts, size_factors, fit.params.k,
                                        fit.params.mu);
  } else {
    fit.params = {mu, k};
  }
  fit.log_likelihood =
      detail::nb_loglik(counts, size_factors, fit.params.mu, fit.params.k);
  return fit;
}

struct GofResult {
  std::string taxon_id;
  double statistic = 0.0;
  double p_value = std::numeric_limits<double>::quiet_NaN();
  double p_adjusted = std::numeric_limits<double>::quiet_NaN();
  int n_sim = 0;
  int n_bins = 0;
  bool degenerate = false;    // fewer than 2 bins after merging
  bool fit_flagged = false;   // ML did not converge, MoM fallback used
  bool skipped = false;       // taxon could not be tested (e.g. all zero)
  std::string note;
  double zeros_observed = 0.0;
  double zeros_expected = 0.0;
};

namespace detail {

// Pearson chi-square over count bins merged greedily (left to right)
// until every expected bin mass is >= 5.
struct ChiSquareBins {
  double statistic = 0.0;
  int n_bins = 0;
};

inline ChiSquareBins gof_statistic(std::span<const std::int64_t> y,
                                   std::span<const double> d, double mu,
                                   double k) {
  std::int64_t kmax = 0;
  for (auto v : y) kmax = std::max(kmax, v);
  const std::size_t ncell = static_cast<std::size_t>(kmax) + 1;

  // NB pmf over 0..kmax by the ratio recurrence, cached per distinct
  // size factor (usually all 1)
  std::vector<std::pair<double, std::vector<double>>> cache;
  cache.reserve(y.size());
  // anchored at the mode so deep-library means cannot underflow the
  // whole row
  auto pmf_for = [&](double dj) -> const std::vector<double> & {
    for (auto &entry : cache)
      if (entry.first == dj) return entry.second;
    const double m = mu * dj;
    std::vector<double> p(ncell, 0.0);
    const std::size_t mode =
        std::min(ncell - 1, static_cast<std::size_t>(m));
    p[mode] = std::exp(log_nb_pmf(static_cast<std::int64_t>(mode), m, k));
    const double r = m / (m + k);
    for (std::size_t c = mode + 1; c < ncell; ++c) {
      p[c] = p[c - 1] * r * (static_cast<double>(c - 1) + k) /
             static_cast<double>(c);
      if (p[c] == 0.0) break;
    }
    for (std::size_t c = mode; c > 0; --c) {
      p[c - 1] = p[c] * static_cast<double>(c) /
                 (r * (static_cast<double>(c - 1) + k));
      if (p[c - 1] == 0.0) break;
    }
    cache.emplace_back(dj, std::move(p));
    return cache.back().second;
  };

  // expected[c] = sum_j P(K_j = c); final open bin holds the upper tails
  std::vector<double> expected(ncell + 1, 0.0);
  std::vector<double> observed(ncell + 1, 0.0);
  for (std::size_t j = 0; j < y.size(); ++j) {
    const auto &pmf = pmf_for(d[j]);
    double tail = 1.0;
    for (std::size_t c = 0; c < ncell; ++c) {
      expected[c] += pmf[c];
      tail -= pmf[c];
    }
    expected[ncell] += std::max(0.0, tail);
    observed[static_cast<std::size_t>(y[j])] += 1.0;
  }

  ChiSquareBins out;
  double eb = 0.0, ob = 0.0;
  std::vector<std::pair<double, double>> bins; // (obs, exp)
  for (std::size_t c = 0; c < expected.size(); ++c) {
    eb += expected[c];
    ob += observed[c];
    if (eb >= 5.0) {
      bins.emplace_back(ob, eb);
      eb = ob = 0.0;
    }
  }
  if (eb > 0.0 || ob > 0.0) {
    if (!bins.empty()) {
      bins.back().first += ob;
      bins.back().second += eb;
    } else {
      bins.emplace_back(ob, eb);
    }
  }
  out.n_bins = static_cast<int>(bins.size());
  for (const auto &[o, e] : bins)
    if (e > 0.0) out.statistic += (o - e) * (o - e) / e;
  return out;
}

} // namespace detail

struct GofOptions {
  bool use_size_factors = true; // let d_j enter the fit and the statistic
};

// Parametric bootstrap GoF: parameters are re-estimated on every
// simulated replicate so the p-value is calibrated. p lands on the
// (r+1)/(n_sim+1) grid and is deterministic given the seed.
inline GofResult gof_nb(std::span<const std::int64_t> counts,
                        std::span<const double> size_factors, int n_sim,
                        std::uint64_t seed, GofOptions opts = {}) {
  std::vector<double> ones;
  std::span<const double> d = size_factors;
  if (!opts.use_size_factors) {
    ones.assign(counts.size(), 1.0);
    d = ones;
  }
  const NBFit fit = fit_nb(counts, d);
  GofResult res;
  res.n_sim = n_sim;
  res.fit_flagged = !fit.converged;

  const auto obs = detail::gof_statistic(counts, d, fit.params.mu,
                                         fit.params.k);
  res.statistic = obs.statistic;
  res.n_bins = obs.n_bins;

  // zero-inflation bookkeeping
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] == 0) res.zeros_observed += 1.0;
    res.zeros_expected +=
        std::exp(log_nb_pmf(0, fit.params.mu * d[j], fit.params.k));
  }

  if (obs.n_bins < 2) {
    res.degenerate = true;
    res.p_value = 1.0;
    res.note = "fewer than 2 bins after merging";
    return res;
  }

  int exceed = 0;
  std::vector<std::int64_t> rep(counts.size());
  for (int r = 0; r < n_sim; ++r) {
    Pcg32 g = Pcg32::substream(seed, static_cast<std::uint64_t>(r));
    bool all_zero = true;
    for (std::size_t j = 0; j < rep.size(); ++j) {
      rep[j] = rnbinom_mu(g, fit.params.mu * d[j], fit.params.k);
      all_zero = all_zero && rep[j] == 0;
    }
    double stat = 0.0;
    if (!all_zero) {
      // refit; a replicate that will not converge keeps the MoM params
      const NBFit rfit = fit_nb(rep, d);
      const auto s = detail::gof_statistic(rep, d, rfit.params.mu,
                                           rfit.params.k);
      stat = s.n_bins < 2 ? 0.0 : s.statistic;
    }
    if (stat >= res.statistic) ++exceed;
  }
  res.p_value = (1.0 + exceed) / (n_sim + 1.0);
  return res;
}

// Benjamini-Hochberg step-up over the non-NaN entries; NaNs propagate.
inline std::vector<double> bh_adjust(const std::vector<double> &p) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (!std::isnan(p[i])) idx.push_back(i);
  std::vector<double> out(p.size(),
                          std::numeric_limits<double>::quiet_NaN());
  if (idx.empty()) return out;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  const double m = static_cast<double>(idx.size());
  double running = 1.0;
  for (std::size_t r = idx.size(); r-- > 0;) {
    const double adj = p[idx[r]] * m / static_cast<double>(r + 1);
    running = std::min(running, adj);
    out[idx[r]] = running;
  }
  return out;
}

struct GofBatch {
  std::vector<GofResult> results;
  double excess_zero_fraction = 0.0; // taxa with more zeros than predicted
};

// One GoF row per taxon with BH adjustment across taxa. Per-taxon
// failures are recorded on the row, never thrown.
inline GofBatch gof_all(const Dataset &data, int n_sim, std::uint64_t seed,
                        GofOptions opts = {}) {
  if (!data.size_factors)
    throw data_error("gof_all: dataset has no size factors; compute "
                     "median-of-ratios first");
  const auto &ct = data.counts;
  const std::size_t m = ct.n_taxa();
  GofBatch batch;
  batch.results.resize(m);
  const auto &d = *data.size_factors;

  parallel_for(m, [&](std::size_t i) {
    std::vector<std::int64_t> row(ct.n_specimens());
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = ct.at(i, j);
    GofResult res;
    res.taxon_id = ct.taxa_ids[i];
    try {
      res = gof_nb(row, d, n_sim, derive_seed(seed, i), opts);
      res.taxon_id = ct.taxa_ids[i];
    } catch (const std::exception &e) {
      res.skipped = true;
      res.note = e.what();
    }
    batch.results[i] = res;
  });

  std::vector<double> pvals(m, std::numeric_limits<double>::quiet_NaN());
  int excess = 0, tested = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto &r = batch.results[i];
    if (!r.skipped) {
      pvals[i] = r.p_value;
      ++tested;
      if (r.zeros_observed > r.zeros_expected) ++excess;
    }
  }
  const auto adj = bh_adjust(pvals);
  for (std::size_t i = 0; i < m; ++i) batch.results[i].p_adjusted = adj[i];
  batch.excess_zero_fraction =
      tested > 0 ? static_cast<double>(excess) / tested : 0.0;
  return batch;
}

} // namespace microstat

#endif
