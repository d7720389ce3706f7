#ifndef MICROSTAT_MCMC_DIAG_HPP
#define MICROSTAT_MCMC_DIAG_HPP

// Rank-normalized split-R-hat and bulk effective sample size
// (Vehtari, Gelman, Simpson, Carpenter, Burkner 2021).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "microstat/errors.hpp"
#include "microstat/special.hpp"

namespace microstat {

namespace detail {

// Split every chain in half (middle draw dropped when odd).
inline std::vector<std::vector<double>>
split_chains(const std::vector<std::vector<double>> &chains) {
  std::vector<std::vector<double>> out;
  for (const auto &c : chains) {
    const std::size_t h = c.size() / 2;
    if (h == 0) continue;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(h));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(h), c.end());
  }
  return out;
}

// Pooled average ranks mapped through the normal quantile (Blom offsets).
inline std::vector<std::vector<double>>
rank_normalize(const std::vector<std::vector<double>> &chains) {
  struct Entry {
    double v;
    std::size_t chain, idx;
  };
  std::vector<Entry> all;
  for (std::size_t c = 0; c < chains.size(); ++c)
    for (std::size_t i = 0; i < chains[c].size(); ++i)
      all.push_back({chains[c][i], c, i});
  std::sort(all.begin(), all.end(),
            [](const Entry &a, const Entry &b) { return a.v < b.v; });
  const double s = static_cast<double>(all.size());
  std::vector<std::vector<double>> out(chains.size());
  for (std::size_t c = 0; c < chains.size(); ++c)
    out[c].resize(chains[c].size());
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j + 1 < all.size() && all[j + 1].v == all[i].v) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    const double z = normal_quantile((rank - 0.375) / (s + 0.25));
    for (std::size_t t = i; t <= j; ++t) out[all[t].chain][all[t].idx] = z;
    i = j + 1;
  }
  return out;
}

struct ChainStats {
  double w = 0.0;      // mean within-chain variance
  double var_plus = 0.0;
  std::size_t n = 0;   // per split chain
  std::size_t m = 0;   // number of split chains
  std::vector<double> means;
  std::vector<double> vars;
};

inline ChainStats chain_stats(const std::vector<std::vector<double>> &split) {
  ChainStats st;
  st.m = split.size();
  st.n = split.empty() ? 0 : split[0].size();
  for (const auto &c : split) {
    double mean = 0.0;
    for (double v : c) mean += v;
    mean /= static_cast<double>(c.size());
    double var = 0.0;
    for (double v : c) var += (v - mean) * (v - mean);
    var /= std::max<double>(1.0, static_cast<double>(c.size()) - 1.0);
    st.means.push_back(mean);
    st.vars.push_back(var);
    st.w += var;
  }
  st.w /= static_cast<double>(st.m);
  double grand = 0.0;
  for (double v : st.means) grand += v;
  grand /= static_cast<double>(st.m);
  double b = 0.0;
  for (double v : st.means) b += (v - grand) * (v - grand);
  b *= static_cast<double>(st.n) / std::max<double>(1.0, st.m - 1.0);
  const double nd = static_cast<double>(st.n);
  st.var_plus = (nd - 1.0) / nd * st.w + b / nd;
  return st;
}

} // namespace detail

// Rank-normalized split-R-hat. 1 means mixed; NaN for all-constant
// input; +inf when chains sit at distinct constants.
inline double split_rhat(const std::vector<std::vector<double>> &chains) {
  const auto split = detail::split_chains(chains);
  if (split.size() < 2 || split[0].size() < 2)
    throw data_error("split_rhat: need at least 1 chain with 4 draws");
  const auto z = detail::rank_normalize(split);
  const auto st = detail::chain_stats(z);
  if (st.w <= 0.0) {
    return st.var_plus > 0.0 ? std::numeric_limits<double>::infinity()
                             : std::numeric_limits<double>::quiet_NaN();
  }
  return std::sqrt(st.var_plus / st.w);
}

// Bulk ESS via Geyer's initial monotone positive sequence on the
// rank-normalized split chains.
inline double bulk_ess(const std::vector<std::vector<double>> &chains) {
  const auto split = detail::split_chains(chains);
  if (split.size() < 2 || split[0].size() < 4)
    throw data_error("bulk_ess: need at least 1 chain with 8 draws");
  const auto z = detail::rank_normalize(split);
  const auto st = detail::chain_stats(z);
  if (st.w <= 0.0 || st.var_plus <= 0.0)
    return std::numeric_limits<double>::quiet_NaN();

  const std::size_t m = st.m, n = st.n;
  const double total = static_cast<double>(m * n);

  // lag-t autocovariance averaged over chains, computed on demand
  auto acov = [&](std::size_t t) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const auto &x = z[c];
      const double mean = st.means[c];
      double a = 0.0;
      for (std::size_t i = 0; i + t < n; ++i)
        a += (x[i] - mean) * (x[i + t] - mean);
      s += a / static_cast<double>(n); // biased normalization, as usual
    }
    return s / static_cast<double>(m);
  };

  double rho_sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 1; t + 1 < n; t += 2) {
    const double rho_a = 1.0 - (st.w - acov(t)) / st.var_plus;
    const double rho_b = 1.0 - (st.w - acov(t + 1)) / st.var_plus;
    double pair = rho_a + rho_b;
    if (pair < 0.0) break;                 // initial positive sequence
    pair = std::min(pair, prev_pair);      // enforce monotonicity
    prev_pair = pair;
    rho_sum += pair;
  }
  const double tau = 1.0 + 2.0 * rho_sum;
  return total / std::max(tau, 1e-12);
}

} // namespace microstat

#endif
