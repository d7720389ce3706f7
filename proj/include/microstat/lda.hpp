#ifndef MICROSTAT_LDA_HPP
#define MICROSTAT_LDA_HPP

// Latent Dirichlet allocation over the count table by collapsed Gibbs
// sampling: specimens are documents, taxa are the vocabulary. The
// sampler keeps per-(specimen, taxon) assignment counts rather than a
// token array, so memory scales with the number of nonzero cells, not
// with reads; random-scan unit updates on the grouped counts target the
// identical posterior. Collapsed Gibbs keeps the sampler self-contained
// and reproducible, with no probabilistic-programming dependency.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "microstat/dataset.hpp"
#include "microstat/errors.hpp"
#include "microstat/mcmc_diag.hpp"
#include "microstat/nbglm.hpp"
#include "microstat/parallel.hpp"
#include "microstat/rng.hpp"
#include "microstat/special.hpp"

namespace microstat {

struct LdaSpec {
  int n_topics = 2;     // T
  double alpha = 0.8;   // Dirichlet prior on topic proportions
  double gamma = 0.5;   // Dirichlet prior on taxon distributions
  int chains = 4;
  int iters = 2000;     // per chain, warmup included
  int warmup = 1000;
  int thin = 1;
  std::uint64_t seed = 0;
};

struct TopicFit {
  int n_topics = 0;
  double alpha = 0.0, gamma = 0.0;
  std::vector<std::string> taxa_ids;
  std::vector<std::string> specimen_ids;
  // post-warmup draws: [chain][draw], theta rows are specimen simplexes
  // (N x T), beta rows are topic simplexes (T x m)
  std::vector<std::vector<std::vector<double>>> theta;
  std::vector<std::vector<std::vector<double>>> beta;
  std::vector<std::vector<double>> loglik;
  std::vector<std::vector<int>> alignment; // permutation applied per chain
  bool aligned = false;

  std::size_t n_specimens() const { return specimen_ids.size(); }
  std::size_t n_taxa() const { return taxa_ids.size(); }
  std::size_t draws_per_chain() const {
    return theta.empty() ? 0 : theta[0].size();
  }

  // pooled posterior mean of beta for one chain, T x m
  std::vector<double> mean_beta(std::size_t chain) const {
    const auto &draws = beta[chain];
    std::vector<double> out(static_cast<std::size_t>(n_topics) * n_taxa(),
                            0.0);
    for (const auto &d : draws)
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i];
    for (auto &v : out) v /= static_cast<double>(draws.size());
    return out;
  }
};

namespace detail {

struct LdaCell {
  std::uint32_t specimen, taxon;
  std::int64_t count;
};

class LdaChain {
public:
  LdaChain(const std::vector<LdaCell> &cells, std::size_t n, std::size_t m,
           const LdaSpec &spec, Pcg32 &g)
      : cells_(cells), n_(n), m_(m),
        t_(static_cast<std::size_t>(spec.n_topics)), alpha_(spec.alpha),
        gamma_(spec.gamma) {
    n_jt_.assign(n_ * t_, 0);
    n_tw_.assign(t_ * m_, 0);
    n_t_.assign(t_, 0);
    s_j_.assign(n_, 0);
    z_.resize(cells_.size());
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      z_[c].assign(t_, 0);
      for (std::int64_t r = 0; r < cells_[c].count; ++r) {
        const auto t = static_cast<std::size_t>(g.bounded(t_));
        bump(c, t, +1);
      }
    }
  }

  // One pass of `count` random-scan unit updates per cell. Removing a
  // uniformly chosen unit (topic picked with probability z_ct / count)
  // is the count-space projection of random-scan token Gibbs, which
  // keeps the posterior invariant; a scan ordered by current topic
  // would not.
  void sweep(Pcg32 &g) {
    std::vector<double> w(t_);
    const double mg = static_cast<double>(m_) * gamma_;
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      const auto &cell = cells_[c];
      for (std::int64_t r = 0; r < cell.count; ++r) {
        auto pick = static_cast<std::int64_t>(
            g.bounded(static_cast<std::uint64_t>(cell.count)));
        std::size_t t = 0;
        while (t + 1 < t_ && pick >= z_[c][t]) {
          pick -= z_[c][t];
          ++t;
        }
        bump(c, t, -1);
        for (std::size_t u = 0; u < t_; ++u)
          w[u] = (static_cast<double>(n_jt_[cell.specimen * t_ + u]) +
                  alpha_) *
                 (static_cast<double>(n_tw_[u * m_ + cell.taxon]) + gamma_) /
                 (static_cast<double>(n_t_[u]) + mg);
        bump(c, sample_index(g, w), +1);
      }
    }
  }

  // collapsed joint log p(z, w | alpha, gamma)
  double log_joint() const {
    const double ta = static_cast<double>(t_) * alpha_;
    const double mg = static_cast<double>(m_) * gamma_;
    double ll = static_cast<double>(n_) *
                (std::lgamma(ta) - static_cast<double>(t_) *
                                       std::lgamma(alpha_));
    for (std::size_t j = 0; j < n_; ++j) {
      for (std::size_t t = 0; t < t_; ++t)
        ll += std::lgamma(static_cast<double>(n_jt_[j * t_ + t]) + alpha_);
      ll -= std::lgamma(static_cast<double>(s_j_[j]) + ta);
    }
    ll += static_cast<double>(t_) *
          (std::lgamma(mg) - static_cast<double>(m_) * std::lgamma(gamma_));
    for (std::size_t t = 0; t < t_; ++t) {
      for (std::size_t v = 0; v < m_; ++v)
        ll += std::lgamma(static_cast<double>(n_tw_[t * m_ + v]) + gamma_);
      ll -= std::lgamma(static_cast<double>(n_t_[t]) + mg);
    }
    return ll;
  }

  std::vector<double> theta_draw() const {
    std::vector<double> out(n_ * t_);
    const double ta = static_cast<double>(t_) * alpha_;
    for (std::size_t j = 0; j < n_; ++j)
      for (std::size_t t = 0; t < t_; ++t)
        out[j * t_ + t] =
            (static_cast<double>(n_jt_[j * t_ + t]) + alpha_) /
            (static_cast<double>(s_j_[j]) + ta);
    return out;
  }

  std::vector<double> beta_draw() const {
    std::vector<double> out(t_ * m_);
    const double mg = static_cast<double>(m_) * gamma_;
    for (std::size_t t = 0; t < t_; ++t)
      for (std::size_t v = 0; v < m_; ++v)
        out[t * m_ + v] = (static_cast<double>(n_tw_[t * m_ + v]) + gamma_) /
                          (static_cast<double>(n_t_[t]) + mg);
    return out;
  }

  // distribution over per-cell assignment count states, for the
  // enumeration cross-check on micro instances
  const std::vector<std::vector<std::int64_t>> &assignments() const {
    return z_;
  }

private:
  void bump(std::size_t cell, std::size_t t, int delta) {
    const auto &c = cells_[cell];
    z_[cell][t] += delta;
    n_jt_[c.specimen * t_ + t] += delta;
    n_tw_[t * m_ + c.taxon] += delta;
    n_t_[t] += delta;
    s_j_[c.specimen] += delta;
  }

  const std::vector<LdaCell> &cells_;
  std::size_t n_, m_, t_;
  double alpha_, gamma_;
  std::vector<std::int64_t> n_jt_, n_tw_, n_t_, s_j_;
  std::vector<std::vector<std::int64_t>> z_; // per-cell topic counts
};

} // namespace detail

// Collapsed Gibbs fit; chains run from independent substreams of the
// seed and are bit-identical on repeat.
inline TopicFit fit_lda(const CountTable &ct, const LdaSpec &spec) {
  const std::size_t n = ct.n_specimens();
  const std::size_t m = ct.n_taxa();
  if (spec.n_topics < 1) throw data_error("fit_lda: need at least 1 topic");
  if (spec.warmup >= spec.iters)
    throw data_error("fit_lda: warmup must be < iters");
  if (spec.thin < 1) throw data_error("fit_lda: thin must be >= 1");

  std::vector<detail::LdaCell> cells;
  std::int64_t total_tokens = 0;
  for (std::size_t j = 0; j < n; ++j) {
    std::int64_t col = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const std::int64_t c = ct.at(i, j);
      if (c < 0) throw data_error("fit_lda: negative count");
      if (c > 0)
        cells.push_back({static_cast<std::uint32_t>(j),
                         static_cast<std::uint32_t>(i), c});
      col += c;
    }
    if (col == 0)
      throw data_error("fit_lda: specimen '" + ct.specimen_ids[j] +
                       "' has no reads");
    total_tokens += col;
  }
  if (spec.n_topics > total_tokens)
    throw data_error("fit_lda: more topics than tokens");

  TopicFit fit;
  fit.n_topics = spec.n_topics;
  fit.alpha = spec.alpha;
  fit.gamma = spec.gamma;
  fit.taxa_ids = ct.taxa_ids;
  fit.specimen_ids = ct.specimen_ids;
  fit.theta.resize(static_cast<std::size_t>(spec.chains));
  fit.beta.resize(static_cast<std::size_t>(spec.chains));
  fit.loglik.resize(static_cast<std::size_t>(spec.chains));
  fit.alignment.assign(static_cast<std::size_t>(spec.chains),
                       std::vector<int>());

  parallel_for(static_cast<std::size_t>(spec.chains), [&](std::size_t chain) {
    Pcg32 g = Pcg32::substream(spec.seed, chain);
    detail::LdaChain state(cells, n, m, spec, g);
    auto &theta = fit.theta[chain];
    auto &beta = fit.beta[chain];
    auto &ll = fit.loglik[chain];
    for (int it = 0; it < spec.iters; ++it) {
      state.sweep(g);
      if (it >= spec.warmup && (it - spec.warmup) % spec.thin == 0) {
        theta.push_back(state.theta_draw());
        beta.push_back(state.beta_draw());
        ll.push_back(state.log_joint());
      }
    }
  });
  return fit;
}

namespace detail {

inline double pearson(const double *a, const double *b, std::size_t n,
                      bool &defined) {
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  const double nd = static_cast<double>(n);
  const double va = saa - sa * sa / nd;
  const double vb = sbb - sb * sb / nd;
  if (va <= 1e-30 || vb <= 1e-30) {
    defined = false;
    return 0.0;
  }
  defined = true;
  return (sab - sa * sb / nd) / std::sqrt(va * vb);
}

} // namespace detail

// Greedy maximum-correlation topic matching against chain 1: repeatedly
// take the best unmatched (reference, candidate) pair of mean beta
// vectors, then permute every draw of the chain accordingly.
inline TopicFit align_chains(TopicFit fit) {
  const auto t = static_cast<std::size_t>(fit.n_topics);
  const std::size_t m = fit.n_taxa();
  if (fit.theta.empty()) throw data_error("align_chains: no chains");
  fit.alignment[0].resize(t);
  std::iota(fit.alignment[0].begin(), fit.alignment[0].end(), 0);

  const auto ref = fit.mean_beta(0);
  for (std::size_t chain = 1; chain < fit.theta.size(); ++chain) {
    const auto cand = fit.mean_beta(chain);
    // corr[r][c] between reference topic r and candidate topic c
    std::vector<double> corr(t * t);
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t c = 0; c < t; ++c) {
        bool defined = true;
        corr[r * t + c] =
            detail::pearson(&ref[r * m], &cand[c * m], m, defined);
        if (!defined)
          throw data_error("align_chains: constant beta vector; the fit is "
                           "degenerate");
      }
    std::vector<int> perm(t, -1); // candidate -> reference slot
    std::vector<char> used_r(t, 0), used_c(t, 0);
    for (std::size_t pick = 0; pick < t; ++pick) {
      double best = -2.0;
      std::size_t br = 0, bc = 0;
      for (std::size_t r = 0; r < t; ++r)
        for (std::size_t c = 0; c < t; ++c)
          if (!used_r[r] && !used_c[c] && corr[r * t + c] > best) {
            best = corr[r * t + c];
            br = r;
            bc = c;
          }
      used_r[br] = used_c[bc] = 1;
      perm[bc] = static_cast<int>(br);
    }
    // apply: new[slot] = old[candidate]
    const std::size_t n = fit.n_specimens();
    for (auto &draw : fit.beta[chain]) {
      std::vector<double> nb(draw.size());
      for (std::size_t c = 0; c < t; ++c)
        std::copy(&draw[c * m], &draw[c * m] + m,
                  &nb[static_cast<std::size_t>(perm[c]) * m]);
      draw = std::move(nb);
    }
    for (auto &draw : fit.theta[chain]) {
      std::vector<double> nt(draw.size());
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t c = 0; c < t; ++c)
          nt[j * t + static_cast<std::size_t>(perm[c])] = draw[j * t + c];
      draw = std::move(nt);
    }
    fit.alignment[chain].assign(perm.begin(), perm.end());
  }
  fit.aligned = true;
  return fit;
}

struct TopicDiagnostics {
  std::vector<double> rhat_theta; // N x T
  std::vector<double> ess_theta;
  std::vector<double> rhat_beta; // T x m
  std::vector<double> ess_beta;

  double max_rhat() const {
    double mx = 0.0;
    for (double v : rhat_theta)
      if (std::isfinite(v)) mx = std::max(mx, v);
    for (double v : rhat_beta)
      if (std::isfinite(v)) mx = std::max(mx, v);
    return mx;
  }
  double min_ess() const {
    double mn = std::numeric_limits<double>::infinity();
    for (double v : ess_theta)
      if (std::isfinite(v)) mn = std::min(mn, v);
    for (double v : ess_beta)
      if (std::isfinite(v)) mn = std::min(mn, v);
    return mn;
  }
};

// Split-R-hat and bulk ESS for every theta and beta component, computed
// on the aligned draws.
inline TopicDiagnostics diagnostics(const TopicFit &fit) {
  if (fit.theta.empty() || fit.draws_per_chain() < 4)
    throw data_error("diagnostics: need at least 4 draws per chain");
  TopicDiagnostics out;
  const std::size_t n_param_theta =
      fit.n_specimens() * static_cast<std::size_t>(fit.n_topics);
  const std::size_t n_param_beta =
      static_cast<std::size_t>(fit.n_topics) * fit.n_taxa();
  out.rhat_theta.resize(n_param_theta);
  out.ess_theta.resize(n_param_theta);
  out.rhat_beta.resize(n_param_beta);
  out.ess_beta.resize(n_param_beta);

  const std::size_t chains = fit.theta.size();
  const std::size_t draws = fit.draws_per_chain();
  auto run = [&](const std::vector<std::vector<std::vector<double>>> &src,
                 std::size_t p, double &rhat, double &ess) {
    std::vector<std::vector<double>> series(chains);
    for (std::size_t c = 0; c < chains; ++c) {
      series[c].resize(draws);
      for (std::size_t d = 0; d < draws; ++d) series[c][d] = src[c][d][p];
    }
    rhat = split_rhat(series);
    ess = bulk_ess(series);
  };
  parallel_for(n_param_theta, [&](std::size_t p) {
    run(fit.theta, p, out.rhat_theta[p], out.ess_theta[p]);
  });
  parallel_for(n_param_beta, [&](std::size_t p) {
    run(fit.beta, p, out.rhat_beta[p], out.ess_beta[p]);
  });
  return out;
}

struct PpcRow {
  std::string taxon_id;
  double observed_max = 0.0;
  double tail_probability = 1.0; // P(G_rep >= G_obs)
  double replicate_mean = 0.0;   // mean of G over replicates
};

// Posterior predictive check with G = per-taxon maximum count over
// specimens: each retained draw simulates a replicate table
// K ~ Multinomial(S_j, B theta_j).
inline std::vector<PpcRow> posterior_predictive_check(
    const TopicFit &fit, const CountTable &ct, std::uint64_t seed,
    std::size_t max_draws = 1000) {
  if (ct.taxa_ids != fit.taxa_ids || ct.specimen_ids != fit.specimen_ids)
    throw data_error("ppc: count table does not match the fit");
  const std::size_t n = ct.n_specimens();
  const std::size_t m = ct.n_taxa();
  const auto t = static_cast<std::size_t>(fit.n_topics);
  const auto sizes = library_sizes(ct);

  // pool draws across chains, evenly subsampled to max_draws
  std::vector<std::pair<std::size_t, std::size_t>> picks; // (chain, draw)
  for (std::size_t c = 0; c < fit.theta.size(); ++c)
    for (std::size_t d = 0; d < fit.theta[c].size(); ++d)
      picks.emplace_back(c, d);
  if (max_draws > 0 && picks.size() > max_draws) {
    std::vector<std::pair<std::size_t, std::size_t>> sub;
    const double stride =
        static_cast<double>(picks.size()) / static_cast<double>(max_draws);
    for (std::size_t i = 0; i < max_draws; ++i)
      sub.push_back(picks[static_cast<std::size_t>(i * stride)]);
    picks = std::move(sub);
  }
  if (picks.empty()) throw data_error("ppc: no posterior draws");

  std::vector<double> obs_max(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      obs_max[i] =
          std::max(obs_max[i], static_cast<double>(ct.at(i, j)));

  std::vector<std::int64_t> exceed(m, 0);
  std::vector<double> g_sum(m, 0.0);
  std::vector<double> rep_max(m);
  std::vector<double> p(m);
  for (std::size_t pick = 0; pick < picks.size(); ++pick) {
    Pcg32 g = Pcg32::substream(seed, pick);
    const auto &[c, didx] = picks[pick];
    const auto &theta = fit.theta[c][didx];
    const auto &beta = fit.beta[c][didx];
    std::fill(rep_max.begin(), rep_max.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t tt = 0; tt < t; ++tt)
          s += theta[j * t + tt] * beta[tt * m + i];
        p[i] = s;
      }
      const auto draw = rmultinom(g, sizes[j], p);
      for (std::size_t i = 0; i < m; ++i)
        rep_max[i] = std::max(rep_max[i], static_cast<double>(draw[i]));
    }
    for (std::size_t i = 0; i < m; ++i) {
      if (rep_max[i] >= obs_max[i]) ++exceed[i];
      g_sum[i] += rep_max[i];
    }
  }

  std::vector<PpcRow> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    out[i].taxon_id = ct.taxa_ids[i];
    out[i].observed_max = obs_max[i];
    out[i].tail_probability =
        static_cast<double>(exceed[i]) / static_cast<double>(picks.size());
    out[i].replicate_mean =
        g_sum[i] / static_cast<double>(picks.size());
  }
  return out;
}

struct TScanRow {
  int n_topics = 0;
  double heldout_loglik = 0.0;
};

// Held-out predictive scan over candidate topic counts: a fixed binomial
// split of every cell (the same split for every T) is refit and scored
// by sum of held-out counts times log predicted taxon probability under
// the posterior mean. No automatic choice is made.
inline std::vector<TScanRow> lda_t_scan(const CountTable &ct,
                                        const std::vector<int> &t_grid,
                                        LdaSpec base,
                                        double holdout_fraction,
                                        std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw data_error("lda_t_scan: holdout fraction must be in (0,1)");
  if (t_grid.empty()) throw data_error("lda_t_scan: empty T grid");
  const std::size_t n = ct.n_specimens();
  const std::size_t m = ct.n_taxa();

  CountTable train = ct;
  CountTable held = ct;
  for (std::size_t j = 0; j < n; ++j) {
    std::int64_t train_total = 0;
    for (std::size_t i = 0; i < m; ++i) {
      Pcg32 g = Pcg32::substream(seed, (7ULL << 56) + i * n + j);
      const std::int64_t h = rbinom(g, ct.at(i, j), holdout_fraction);
      held.at(i, j) = h;
      train.at(i, j) = ct.at(i, j) - h;
      train_total += train.at(i, j);
    }
    if (train_total == 0) {
      // keep the specimen fittable: move one read back
      for (std::size_t i = 0; i < m; ++i)
        if (held.at(i, j) > 0) {
          held.at(i, j) -= 1;
          train.at(i, j) += 1;
          break;
        }
    }
  }

  std::vector<TScanRow> out;
  for (int t : t_grid) {
    LdaSpec spec = base;
    spec.n_topics = t;
    const TopicFit fit = fit_lda(train, spec);
    // posterior mean of theta and beta pooled over chains
    const auto tt = static_cast<std::size_t>(t);
    std::vector<double> theta(n * tt, 0.0), beta(tt * m, 0.0);
    std::size_t nd = 0;
    for (std::size_t c = 0; c < fit.theta.size(); ++c)
      for (std::size_t d = 0; d < fit.theta[c].size(); ++d) {
        for (std::size_t i = 0; i < theta.size(); ++i)
          theta[i] += fit.theta[c][d][i];
        for (std::size_t i = 0; i < beta.size(); ++i)
          beta[i] += fit.beta[c][d][i];
        ++nd;
      }
    for (auto &v : theta) v /= static_cast<double>(nd);
    for (auto &v : beta) v /= static_cast<double>(nd);

    double ll = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < m; ++i) {
        if (held.at(i, j) == 0) continue;
        double p = 0.0;
        for (std::size_t u = 0; u < tt; ++u)
          p += theta[j * tt + u] * beta[u * m + i];
        ll += static_cast<double>(held.at(i, j)) *
              std::log(std::max(p, 1e-300));
      }
    out.push_back({t, ll});
  }
  return out;
}

inline std::int64_t round_half_even(double v) {
  const double fl = std::floor(v);
  const double frac = v - fl;
  if (frac > 0.5) return static_cast<std::int64_t>(fl) + 1;
  if (frac < 0.5) return static_cast<std::int64_t>(fl);
  const auto i = static_cast<std::int64_t>(fl);
  return i % 2 == 0 ? i : i + 1;
}

// T x N topic abundance table: median posterior theta scaled by library
// size, rounded half to even.
inline CountTable topic_count_table(const TopicFit &fit,
                                    const std::vector<std::int64_t> &lib_sizes) {
  const std::size_t n = fit.n_specimens();
  const auto t = static_cast<std::size_t>(fit.n_topics);
  if (lib_sizes.size() != n)
    throw data_error("topic_count_table: library size length mismatch");

  CountTable out;
  out.specimen_ids = fit.specimen_ids;
  for (std::size_t tt = 0; tt < t; ++tt)
    out.taxa_ids.push_back("Topic_" + std::to_string(tt + 1));
  out.counts.resize(t * n);

  std::vector<double> buf;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t tt = 0; tt < t; ++tt) {
      buf.clear();
      for (const auto &chain : fit.theta)
        for (const auto &draw : chain) buf.push_back(draw[j * t + tt]);
      if (buf.empty()) throw data_error("topic_count_table: no draws");
      std::sort(buf.begin(), buf.end());
      const std::size_t h = buf.size() / 2;
      const double med =
          buf.size() % 2 ? buf[h] : 0.5 * (buf[h - 1] + buf[h]);
      out.counts[tt * n + j] =
          round_half_even(med * static_cast<double>(lib_sizes[j]));
    }
  return out;
}

// Differential topic analysis: the topic abundance table goes through
// the NB GLM Wald test with library-size-derived factors (geometric
// mean 1). Output rows are Topic_1..Topic_T.
inline std::vector<WaldRow> differential_topics(
    const TopicFit &fit, const std::vector<std::int64_t> &lib_sizes,
    const std::vector<std::string> &groups) {
  const std::size_t n = fit.n_specimens();
  if (groups.size() != n)
    throw data_error("differential_topics: group length mismatch");
  const CountTable topics = topic_count_table(fit, lib_sizes);

  std::vector<double> sf(n);
  double lg = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (lib_sizes[j] <= 0)
      throw data_error("differential_topics: non-positive library size");
    sf[j] = static_cast<double>(lib_sizes[j]);
    lg += std::log(sf[j]);
  }
  lg = std::exp(lg / static_cast<double>(n));
  for (auto &v : sf) v /= lg;

  return wald_test(topics, groups, sf);
}

} // namespace microstat

#endif
