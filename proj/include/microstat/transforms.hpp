#ifndef MICROSTAT_TRANSFORMS_HPP
#define MICROSTAT_TRANSFORMS_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "microstat/dataset.hpp"
#include "microstat/errors.hpp"

namespace microstat {

enum class TransformTag { anscombe, truncated_rank, presence_absence, scaled };

inline std::string to_string(TransformTag t) {
  switch (t) {
    case TransformTag::anscombe: return "anscombe";
    case TransformTag::truncated_rank: return "truncated_rank";
    case TransformTag::presence_absence: return "presence_absence";
    case TransformTag::scaled: return "scaled";
  }
  return "?";
}

// Real-valued table with the same shape and identifiers as its source,
// plus the parameters needed to re-derive it.
struct TransformedTable {
  std::vector<std::string> taxa_ids;
  std::vector<std::string> specimen_ids;
  std::vector<double> values; // row-major, m*N
  TransformTag tag = TransformTag::scaled;
  std::map<std::string, double> params;      // c, t, tau, ...
  std::vector<double> per_taxon_param;       // k_i for anscombe, else empty
  std::vector<std::string> flagged_taxa;     // e.g. clamped dispersions

  std::size_t n_taxa() const { return taxa_ids.size(); }
  std::size_t n_specimens() const { return specimen_ids.size(); }
  double &at(std::size_t i, std::size_t j) {
    return values[i * specimen_ids.size() + j];
  }
  double at(std::size_t i, std::size_t j) const {
    return values[i * specimen_ids.size() + j];
  }
};

// Median-of-ratios size factors d_j, rescaled so their geometric mean is 1.
// Reference rows are taxa positive in every specimen; with
// allow_pseudo_reference, rows use the geometric mean over their positive
// entries instead, so tables with no all-positive row still work.
inline std::vector<double> median_of_ratios(const CountTable &ct,
                                            bool allow_pseudo_reference = false) {
  const std::size_t m = ct.n_taxa();
  const std::size_t n = ct.n_specimens();
  if (n == 0 || m == 0) throw data_error("median_of_ratios: empty table");

  std::vector<double> geo(m, 0.0);
  std::vector<char> usable(m, 0);
  std::size_t n_usable = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double logsum = 0.0;
    std::size_t positive = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::int64_t k = ct.at(i, j);
      if (k > 0) {
        logsum += std::log(static_cast<double>(k));
        ++positive;
      }
    }
    const bool ok = allow_pseudo_reference ? positive > 0 : positive == n;
    if (ok) {
      geo[i] = std::exp(logsum / static_cast<double>(positive));
      usable[i] = 1;
      ++n_usable;
    }
  }
  if (n_usable == 0)
    throw data_error(
        "median_of_ratios: no taxon is positive in all specimens; "
        "re-run with the pseudo-reference option");

  std::vector<double> d(n);
  std::vector<double> ratios;
  ratios.reserve(n_usable);
  for (std::size_t j = 0; j < n; ++j) {
    ratios.clear();
    for (std::size_t i = 0; i < m; ++i) {
      if (!usable[i]) continue;
      // under the pseudo-reference a zero cell says nothing about depth
      if (allow_pseudo_reference && ct.at(i, j) == 0) continue;
      ratios.push_back(static_cast<double>(ct.at(i, j)) / geo[i]);
    }
    if (ratios.empty())
      throw data_error("median_of_ratios: specimen '" + ct.specimen_ids[j] +
                       "' shares no positive taxon with the reference");
    std::sort(ratios.begin(), ratios.end());
    const std::size_t h = ratios.size() / 2;
    d[j] = (ratios.size() % 2 == 1) ? ratios[h]
                                    : 0.5 * (ratios[h - 1] + ratios[h]);
  }
  double loggm = 0.0;
  for (double v : d) {
    if (!(v > 0.0))
      throw data_error("median_of_ratios: zero median ratio; use the "
                       "pseudo-reference option on sparse tables");
    loggm += std::log(v);
  }
  loggm /= static_cast<double>(n);
  for (double &v : d) v /= std::exp(loggm);
  return d;
}

// Anscombe's inverse hyperbolic sine transform for NB counts,
// asinh(sqrt((K + c)/(k - 2c))) with c = 3/8. Taxa with k <= 1 are
// clamped to 1 + 1e-6 and flagged; the transform is ill-behaved there.
inline TransformedTable anscombe(const CountTable &ct,
                                 const std::vector<double> &dispersion) {
  if (dispersion.size() != ct.n_taxa())
    throw data_error("anscombe: need one dispersion per taxon");
  constexpr double c = 3.0 / 8.0;
  TransformedTable out;
  out.taxa_ids = ct.taxa_ids;
  out.specimen_ids = ct.specimen_ids;
  out.tag = TransformTag::anscombe;
  out.params["c"] = c;
  out.values.resize(ct.counts.size());
  out.per_taxon_param.resize(ct.n_taxa());
  for (std::size_t i = 0; i < ct.n_taxa(); ++i) {
    double k = dispersion[i];
    if (!(k > 0.0) || !std::isfinite(k))
      throw data_error("anscombe: invalid dispersion for taxon '" +
                       ct.taxa_ids[i] + "'");
    if (k <= 1.0) {
      k = 1.0 + 1e-6;
      out.flagged_taxa.push_back(ct.taxa_ids[i]);
    }
    out.per_taxon_param[i] = k;
    const double denom = k - 2.0 * c;
    for (std::size_t j = 0; j < ct.n_specimens(); ++j)
      out.at(i, j) =
          std::asinh(std::sqrt((static_cast<double>(ct.at(i, j)) + c) / denom));
  }
  return out;
}

namespace detail {

// Ascending ranks 1..m with average ranks on ties.
inline std::vector<double> average_ranks(const std::vector<double> &x) {
  const std::size_t m = x.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(m);
  std::size_t i = 0;
  while (i < m) {
    std::size_t j = i;
    while (j + 1 < m && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

} // namespace detail

// Within-specimen threshold ranks: rank taxa ascending by abundance
// (average ranks on ties) and clamp everything below t to a score of 1,
// score = max(rank - t, 1).
inline TransformedTable truncated_rank(const CountTable &ct, std::int64_t t) {
  const std::size_t m = ct.n_taxa();
  if (t < 0 || static_cast<std::size_t>(t) >= m)
    throw data_error("truncated_rank: threshold must satisfy 0 <= t < m");
  TransformedTable out;
  out.taxa_ids = ct.taxa_ids;
  out.specimen_ids = ct.specimen_ids;
  out.tag = TransformTag::truncated_rank;
  out.params["t"] = static_cast<double>(t);
  out.values.resize(ct.counts.size());
  std::vector<double> col(m);
  for (std::size_t j = 0; j < ct.n_specimens(); ++j) {
    for (std::size_t i = 0; i < m; ++i)
      col[i] = static_cast<double>(ct.at(i, j));
    const auto ranks = detail::average_ranks(col);
    for (std::size_t i = 0; i < m; ++i)
      out.at(i, j) = std::max(ranks[i] - static_cast<double>(t), 1.0);
  }
  return out;
}

// B_ij = 1 iff K_ij >= tau.
inline TransformedTable presence_absence(const CountTable &ct,
                                         std::int64_t tau = 2) {
  if (tau < 1) throw data_error("presence_absence: tau must be >= 1");
  TransformedTable out;
  out.taxa_ids = ct.taxa_ids;
  out.specimen_ids = ct.specimen_ids;
  out.tag = TransformTag::presence_absence;
  out.params["tau"] = static_cast<double>(tau);
  out.values.resize(ct.counts.size());
  for (std::size_t i = 0; i < ct.n_taxa(); ++i)
    for (std::size_t j = 0; j < ct.n_specimens(); ++j)
      out.at(i, j) = ct.at(i, j) >= tau ? 1.0 : 0.0;
  return out;
}

inline TransformedTable scale_by_size_factors(const CountTable &ct,
                                              const std::vector<double> &d) {
  if (d.size() != ct.n_specimens())
    throw data_error("scale_by_size_factors: size factor length mismatch");
  for (double v : d)
    if (!(v > 0.0))
      throw data_error("scale_by_size_factors: size factors must be > 0");
  TransformedTable out;
  out.taxa_ids = ct.taxa_ids;
  out.specimen_ids = ct.specimen_ids;
  out.tag = TransformTag::scaled;
  out.values.resize(ct.counts.size());
  for (std::size_t i = 0; i < ct.n_taxa(); ++i)
    for (std::size_t j = 0; j < ct.n_specimens(); ++j)
      out.at(i, j) = static_cast<double>(ct.at(i, j)) / d[j];
  return out;
}

} // namespace microstat

#endif
