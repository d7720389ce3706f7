#ifndef MICROSTAT_DECONTAM_HPP
#define MICROSTAT_DECONTAM_HPP

// Per-(taxon, specimen) contamination inference with negative controls:
//
//   K | lr, lc, d ~ Poisson((lr + lc) d)
//   lc ~ Gamma(alpha_c, beta_c)          (rate parameterization)
//   lr ~ sqrt(I(lr)) / sqrt(I(eps))      (marginal reference prior)
//
// where I is the Fisher information of the lc-marginalized likelihood.
// That marginal has a closed form: K is the convolution of a
// Poisson(lr d) count with an NB(alpha_c, beta_c/(beta_c + d)) count,
// so I(lr) reduces to a finite sum evaluated without quadrature. The
// prior is cached as a cubic spline of log I over log lr per cell.
//
// Sampling is Gibbs-within-Metropolis: binomial thinning of K into
// (real, contaminant) parts, a conjugate gamma update for lc, and a
// log-scale random-walk Metropolis step for lr with step size adapted
// to a [0.3, 0.5] acceptance rate during warmup.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "microstat/dataset.hpp"
#include "microstat/errors.hpp"
#include "microstat/parallel.hpp"
#include "microstat/rng.hpp"
#include "microstat/special.hpp"
#include "microstat/transforms.hpp"

namespace microstat {

struct ContamPrior {
  double alpha = 0.01; // gamma shape
  double beta = 1.0;   // gamma rate
  bool floored = false;
};

// Method-of-moments gamma fit to the scaled control intensities
// K0_il / d0_l per taxon. Taxa with no signal or no spread in the
// controls fall to the weakly-informative floor prior.
inline std::vector<ContamPrior> estimate_contam_prior(
    const CountTable &ct, const std::vector<std::size_t> &control_cols,
    const std::vector<double> &control_size_factors) {
  if (control_cols.size() < 2)
    throw data_error("estimate_contam_prior: need at least 2 negative "
                     "controls");
  if (control_cols.size() != control_size_factors.size())
    throw data_error("estimate_contam_prior: size factor length mismatch");
  std::vector<ContamPrior> out(ct.n_taxa());
  for (std::size_t i = 0; i < ct.n_taxa(); ++i) {
    double s = 0.0, s2 = 0.0;
    const double n = static_cast<double>(control_cols.size());
    for (std::size_t c = 0; c < control_cols.size(); ++c) {
      const double x = static_cast<double>(ct.at(i, control_cols[c])) /
                       control_size_factors[c];
      s += x;
      s2 += x * x;
    }
    const double mean = s / n;
    const double var = (s2 - n * mean * mean) / (n - 1.0);
    if (mean > 0.0 && var > 0.0) {
      out[i].alpha = mean * mean / var;
      out[i].beta = mean / var;
    } else {
      out[i].floored = true; // keep the (0.01, 1) floor
    }
  }
  return out;
}

namespace detail {

// pmf array computed by recurrence from the mode (stable without logs),
// normalized to sum 1 on [0, len).
inline std::vector<double> poisson_pmf_array(double lambda, std::size_t len) {
  std::vector<double> p(len, 0.0);
  if (lambda <= 0.0) {
    p[0] = 1.0;
    return p;
  }
  const std::size_t mode =
      std::min<std::size_t>(len - 1, static_cast<std::size_t>(lambda));
  p[mode] = 1.0;
  for (std::size_t j = mode + 1; j < len; ++j) {
    p[j] = p[j - 1] * lambda / static_cast<double>(j);
    if (p[j] < 1e-280) break;
  }
  for (std::size_t j = mode; j > 0; --j) {
    p[j - 1] = p[j] * static_cast<double>(j) / lambda;
    if (p[j - 1] < 1e-280) break;
  }
  double total = 0.0;
  for (double v : p) total += v;
  for (double &v : p) v /= total;
  return p;
}

// NB(size alpha, success prob q) pmf array, same scheme.
inline std::vector<double> nb_pmf_array(double alpha, double q,
                                        std::size_t len) {
  std::vector<double> p(len, 0.0);
  const double mean = alpha * (1.0 - q) / q;
  const std::size_t mode =
      std::min<std::size_t>(len - 1, static_cast<std::size_t>(mean));
  p[mode] = 1.0;
  // p(i+1)/p(i) = (alpha + i) (1-q) / (i + 1)
  for (std::size_t j = mode + 1; j < len; ++j) {
    p[j] = p[j - 1] * (alpha + static_cast<double>(j - 1)) * (1.0 - q) /
           static_cast<double>(j);
    if (p[j] < 1e-280) break;
  }
  for (std::size_t j = mode; j > 0; --j) {
    const double ratio = (alpha + static_cast<double>(j - 1)) * (1.0 - q) /
                         static_cast<double>(j);
    p[j - 1] = ratio > 0.0 ? p[j] / ratio : 0.0;
    if (p[j - 1] < 1e-280 && j - 1 < mode) break;
  }
  double total = 0.0;
  for (double v : p) total += v;
  for (double &v : p) v /= total;
  return p;
}

// Natural cubic spline through (x, y), strictly increasing x.
class CubicSpline {
public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> x, std::vector<double> y)
      : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    m_.assign(n, 0.0);
    if (n < 3) return;
    std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), r(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1];
      const double h1 = x_[i + 1] - x_[i];
      a[i] = h0 / 6.0;
      b[i] = (h0 + h1) / 3.0;
      c[i] = h1 / 6.0;
      r[i] = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
    }
    b[0] = b[n - 1] = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      r[i] -= w * r[i - 1];
    }
    m_[n - 1] = r[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;)
      m_[i] = (r[i] - c[i] * m_[i + 1]) / b[i];
  }

  double operator()(double x) const {
    const std::size_t n = x_.size();
    if (n == 0) return 0.0;
    if (x <= x_.front()) { // linear extension with boundary slope
      const double s = slope(0);
      return y_.front() + s * (x - x_.front());
    }
    if (x >= x_.back()) {
      const double s = slope(n - 2);
      return y_.back() + s * (x - x_.back());
    }
    const std::size_t i =
        static_cast<std::size_t>(
            std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) -
        1;
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double u = 1.0 - t;
    return u * y_[i] + t * y_[i + 1] +
           h * h / 6.0 *
               ((u * u * u - u) * m_[i] + (t * t * t - t) * m_[i + 1]);
  }

private:
  double slope(std::size_t i) const {
    if (x_.size() < 2) return 0.0;
    return (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
  }
  std::vector<double> x_, y_, m_;
};

} // namespace detail

// Reference prior for one cell: Fisher information of the gamma-mixed
// Poisson marginal, exposed directly and through the spline cache.
class ReferencePrior {
public:
  static constexpr double kEpsilon = 1e-8;

  ReferencePrior(double d, const ContamPrior &prior, double lambda_max)
      : d_(d), prior_(prior) {
    if (!(d > 0.0)) throw numeric_error("reference prior: d must be > 0");
    lambda_max_ = std::max(lambda_max, 10.0 / d);
    build();
  }

  // I(lambda) = sum_k p'(k)^2 / p(k), p = Poisson(lambda d) * NB prior
  // predictive (a convolution), p' = d (p(k-1) - p(k)).
  double fisher_info(double lambda) const {
    const double q = prior_.beta / (prior_.beta + d_);
    const double contam_mean = prior_.alpha * (1.0 - q) / q;
    const double contam_var = contam_mean / q;
    const double mu = lambda * d_;
    const double sd = std::sqrt(mu + contam_mean + contam_var + 1.0);
    const std::size_t kmax =
        static_cast<std::size_t>(mu + contam_mean + 14.0 * sd + 40.0);
    const auto poi = detail::poisson_pmf_array(mu, kmax + 1);
    // effective NB support
    std::size_t nb_len = static_cast<std::size_t>(
        contam_mean + 14.0 * std::sqrt(contam_var + 1.0) + 40.0);
    nb_len = std::min(nb_len, kmax + 1);
    const auto nb = detail::nb_pmf_array(prior_.alpha, q, nb_len);

    std::vector<double> p(kmax + 2, 0.0);
    for (std::size_t k = 0; k <= kmax; ++k) {
      double s = 0.0;
      const std::size_t lo = k + 1 >= nb_len ? k + 1 - nb_len : 0;
      for (std::size_t i = lo; i <= k; ++i) s += poi[i] * nb[k - i];
      p[k] = s;
    }
    double info = 0.0;
    for (std::size_t k = 0; k <= kmax; ++k) {
      if (p[k] <= 0.0) continue;
      const double dp = d_ * ((k == 0 ? 0.0 : p[k - 1]) - p[k]);
      info += dp * dp / p[k];
    }
    return info;
  }

  // log( sqrt(I(lambda)) / sqrt(I(eps)) ), spline-interpolated
  double log_prior(double lambda) const {
    const double ll = std::log(std::max(lambda, 1e-300));
    return 0.5 * (spline_(ll) - log_info_eps_);
  }

  double log_info_at_epsilon() const { return log_info_eps_; }

private:
  void build() {
    const double lo = std::log(kEpsilon);
    const double hi = std::log(lambda_max_);
    const std::size_t grid = 33;
    std::vector<double> xs(grid), ys(grid);
    for (std::size_t g = 0; g < grid; ++g) {
      const double x =
          lo + (hi - lo) * static_cast<double>(g) / (grid - 1.0);
      const double info = fisher_info(std::exp(x));
      if (!(info > 0.0) || !std::isfinite(info))
        throw numeric_error(
            "reference prior: Fisher information evaluation failed at "
            "lambda = " +
            std::to_string(std::exp(x)));
      xs[g] = x;
      ys[g] = std::log(info);
    }
    log_info_eps_ = ys.front();
    spline_ = detail::CubicSpline(std::move(xs), std::move(ys));
  }

  double d_;
  ContamPrior prior_;
  double lambda_max_;
  double log_info_eps_ = 0.0;
  detail::CubicSpline spline_;
};

struct McmcSettings {
  int chains = 4;
  int iters = 2000; // per chain, warmup included
  int warmup = 1000;
  double hpd_level = 0.95;
  std::uint64_t seed = 0;
};

struct CellDraws {
  std::vector<double> lambda_r;
  std::vector<double> lambda_c;
  double acceptance_rate = 0.0;
  bool normal_approx = false; // k > 1e7 thinning path
};

namespace detail {

// One cell's Gibbs-within-Metropolis transition kernel, exposed
// incrementally so validation tests can interleave sweeps with data
// redraws (Geweke-style joint-distribution checks). The lambda_r prior
// is pluggable: the reference prior in production, proper priors in
// tests.
class CellSampler {
public:
  CellSampler(std::int64_t k, double d, const ContamPrior &prior,
              std::function<double(double)> log_prior_lr)
      : d_(d), prior_(prior), log_prior_(std::move(log_prior_lr)) {
    if (k < 0) throw data_error("sample_posterior: negative count");
    if (!(d > 0.0)) throw data_error("sample_posterior: d must be positive");
    set_count(k);
    lc_ = std::max(prior_.alpha / prior_.beta, 1e-4);
    theta_ = std::log(
        std::max(static_cast<double>(k) / (2.0 * d_), 0.5 / d_));
  }

  void set_count(std::int64_t k) {
    k_ = k;
    huge_ = k > 10000000;
  }

  void freeze_adaptation() { adapting_ = false; }

  void sweep(Pcg32 &g) {
    // (a) thin K into contaminant and real parts
    const double lr = std::exp(theta_);
    const double pc = lc_ / (lr + lc_);
    std::int64_t kc;
    if (k_ == 0) {
      kc = 0;
    } else if (huge_) {
      const double mean = static_cast<double>(k_) * pc;
      const double sd = std::sqrt(std::max(mean * (1.0 - pc), 1e-12));
      kc = std::llround(mean + sd * rnorm(g));
      kc = std::clamp<std::int64_t>(kc, 0, k_);
    } else {
      kc = rbinom(g, k_, pc);
    }
    const std::int64_t kr = k_ - kc;
    // (b) conjugate gamma update of the contaminant intensity
    lc_ = rgamma(g, prior_.alpha + static_cast<double>(kc), prior_.beta + d_);
    // (c) random-walk Metropolis on log lambda_r
    const double proposal = theta_ + step_ * rnorm(g);
    ++proposals_;
    ++batch_;
    if (std::fabs(proposal) < 60.0 &&
        std::log(runif_pos(g)) <
            log_target(proposal, kr) - log_target(theta_, kr)) {
      theta_ = proposal;
      ++accepted_;
      ++accepted_batch_;
    }
    if (adapting_ && batch_ == 50) {
      const double rate = accepted_batch_ / 50.0;
      if (rate < 0.3)
        step_ *= 0.8;
      else if (rate > 0.5)
        step_ *= 1.25;
      step_ = std::clamp(step_, 1e-3, 10.0);
      accepted_batch_ = 0;
      batch_ = 0;
    }
  }

  double lambda_r() const { return std::exp(theta_); }
  double lambda_c() const { return lc_; }
  bool uses_normal_approx() const { return huge_; }
  long proposals() const { return proposals_; }
  long accepted() const { return accepted_; }

private:
  double log_target(double th, std::int64_t kr) const {
    const double lr = std::exp(th);
    // Poisson(kr; lr d) kernel + prior + log-scale Jacobian
    return static_cast<double>(kr) * th - lr * d_ + log_prior_(lr) + th;
  }

  std::int64_t k_ = 0;
  double d_;
  ContamPrior prior_;
  std::function<double(double)> log_prior_;
  double lc_ = 1e-4;
  double theta_ = 0.0;
  double step_ = 1.0;
  bool huge_ = false;
  bool adapting_ = true;
  int batch_ = 0, accepted_batch_ = 0;
  long proposals_ = 0, accepted_ = 0;
};

inline CellDraws sample_posterior_with_prior(
    std::int64_t k, double d, const ContamPrior &prior,
    const McmcSettings &mc, std::uint64_t cell_seed,
    const std::function<double(double)> &log_prior_lr) {
  if (mc.warmup >= mc.iters)
    throw data_error("sample_posterior: warmup must be < iters");
  CellDraws out;
  const int keep = mc.iters - mc.warmup;
  out.lambda_r.reserve(static_cast<std::size_t>(keep) * mc.chains);
  out.lambda_c.reserve(static_cast<std::size_t>(keep) * mc.chains);

  long accepted = 0, proposals = 0;
  for (int chain = 0; chain < mc.chains; ++chain) {
    Pcg32 g = Pcg32::substream(cell_seed, static_cast<std::uint64_t>(chain));
    CellSampler sampler(k, d, prior, log_prior_lr);
    out.normal_approx = sampler.uses_normal_approx();
    for (int it = 0; it < mc.iters; ++it) {
      if (it == mc.warmup) sampler.freeze_adaptation();
      sampler.sweep(g);
      if (it >= mc.warmup) {
        out.lambda_r.push_back(sampler.lambda_r());
        out.lambda_c.push_back(sampler.lambda_c());
      }
    }
    accepted += sampler.accepted();
    proposals += sampler.proposals();
  }
  out.acceptance_rate =
      proposals > 0 ? static_cast<double>(accepted) / proposals : 0.0;
  return out;
}

} // namespace detail

// Posterior draws of (lambda_r, lambda_c) for one observed count under
// the reference prior. Bit-identical for identical inputs and seed.
inline CellDraws sample_posterior(std::int64_t k, double d,
                                  const ContamPrior &prior,
                                  const McmcSettings &mc,
                                  std::uint64_t cell_seed) {
  const double kd = static_cast<double>(k);
  const double lambda_max = (kd + 10.0 * std::sqrt(kd + 1.0) + 25.0) / d;
  ReferencePrior ref(d, prior, lambda_max);
  return detail::sample_posterior_with_prior(
      k, d, prior, mc, cell_seed,
      [&ref](double lr) { return ref.log_prior(lr); });
}

struct Hpd {
  double lower = 0.0;
  double upper = 0.0;
};

// Shortest interval containing `level` posterior mass: scan every
// window of the sorted draws.
inline Hpd hpd_interval(std::vector<double> draws, double level) {
  if (draws.empty()) throw data_error("hpd_interval: no draws");
  if (!(level > 0.0 && level < 1.0))
    throw data_error("hpd_interval: level must be in (0,1)");
  std::sort(draws.begin(), draws.end());
  const std::size_t n = draws.size();
  std::size_t w = static_cast<std::size_t>(
      std::ceil(level * static_cast<double>(n)));
  w = std::clamp<std::size_t>(w, 1, n);
  std::size_t best = 0;
  double best_len = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j + w <= n; ++j) {
    const double len = draws[j + w - 1] - draws[j];
    if (len < best_len) {
      best_len = len;
      best = j;
    }
  }
  return {draws[best], draws[best + w - 1]};
}

struct PosteriorSummary {
  std::string taxon_id;
  std::string specimen_id;
  Hpd hpd_true;
  Hpd hpd_contam;
  bool is_contaminant = false;
  int n_draws = 0;
  double acceptance_rate = 0.0;
  bool evaluated = false; // false: zero count, cell skipped
  bool failed = false;
  std::string note;
};

struct DecontamResult {
  std::vector<PosteriorSummary> summaries; // taxon-major cell order
  Dataset cleaned;
  std::vector<ContamPrior> priors;
  int contaminant_cells = 0;
  std::vector<std::string> contaminant_taxa; // taxon-level calls
};

struct DecontamOptions {
  bool taxon_level = false; // zero whole taxa called in >= 50% of cells
};

// Runs the sampler over every (taxon, biological specimen) cell with a
// positive count, calls contaminants by the L^r < U^c rule at the HPD
// level, and returns the cleaned dataset. Per-cell failures are
// recorded, never thrown.
inline DecontamResult call_contaminants(const Dataset &data,
                                        const McmcSettings &mc,
                                        DecontamOptions opts = {}) {
  const auto &ct = data.counts;
  const auto controls = data.specimen_indices(SpecimenType::negative_control);
  const auto biological = data.specimen_indices(SpecimenType::biological);
  if (controls.size() < 2)
    throw data_error("decontam: need at least 2 negative controls");
  if (biological.empty())
    throw data_error("decontam: no biological specimens");
  if (!data.size_factors)
    throw data_error("decontam: dataset has no size factors; compute "
                     "median-of-ratios first");
  const auto &sf = *data.size_factors;

  std::vector<double> control_sf;
  for (std::size_t c : controls) control_sf.push_back(sf[c]);
  DecontamResult res;
  res.priors = estimate_contam_prior(ct, controls, control_sf);

  const std::size_t m = ct.n_taxa();
  const std::size_t nb = biological.size();
  res.summaries.resize(m * nb);

  parallel_for(m * nb, [&](std::size_t cell) {
    const std::size_t i = cell / nb;
    const std::size_t bj = cell % nb;
    const std::size_t j = biological[bj];
    PosteriorSummary s;
    s.taxon_id = ct.taxa_ids[i];
    s.specimen_id = ct.specimen_ids[j];
    const std::int64_t k = ct.at(i, j);
    if (k > 0) {
      try {
        const auto draws =
            sample_posterior(k, sf[j], res.priors[i], mc,
                             derive_seed(mc.seed, cell));
        s.hpd_true = hpd_interval(draws.lambda_r, mc.hpd_level);
        s.hpd_contam = hpd_interval(draws.lambda_c, mc.hpd_level);
        s.is_contaminant = s.hpd_true.lower < s.hpd_contam.upper;
        s.n_draws = static_cast<int>(draws.lambda_r.size());
        s.acceptance_rate = draws.acceptance_rate;
        s.evaluated = true;
        if (draws.normal_approx)
          s.note = "binomial thinning via normal approximation";
      } catch (const std::exception &e) {
        s.failed = true;
        s.note = e.what();
      }
    } else {
      s.note = "zero count";
    }
    res.summaries[cell] = s;
  });

  // taxon-level calls: flagged in at least half of the biological cells
  std::vector<int> flags(m, 0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t bj = 0; bj < nb; ++bj)
      if (res.summaries[i * nb + bj].is_contaminant) ++flags[i];
  for (std::size_t i = 0; i < m; ++i)
    if (2 * flags[i] >= static_cast<int>(nb) && flags[i] > 0)
      res.contaminant_taxa.push_back(ct.taxa_ids[i]);

  res.cleaned = data;
  if (opts.taxon_level) {
    for (const auto &tid : res.contaminant_taxa) {
      const int i = ct.taxon_index(tid);
      for (std::size_t j = 0; j < ct.n_specimens(); ++j)
        res.cleaned.counts.at(static_cast<std::size_t>(i), j) = 0;
    }
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t bj = 0; bj < nb; ++bj)
        if (res.summaries[i * nb + bj].is_contaminant)
          res.cleaned.counts.at(i, biological[bj]) = 0;
  }
  for (const auto &s : res.summaries)
    if (s.is_contaminant) ++res.contaminant_cells;
  return res;
}

// Size factors for Eq. (1): the shared median-of-ratios implementation.
inline std::vector<double> size_factor_reference(const Dataset &data,
                                                 bool pseudo_reference =
                                                     false) {
  return median_of_ratios(data.counts, pseudo_reference);
}

} // namespace microstat

#endif
