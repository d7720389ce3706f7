#ifndef MICROSTAT_PERMTEST_HPP
#define MICROSTAT_PERMTEST_HPP

// Permutation inference on distance matrices and the strain-switching
// power harness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "microstat/distances.hpp"
#include "microstat/errors.hpp"
#include "microstat/parallel.hpp"
#include "microstat/rng.hpp"
#include "microstat/simulate.hpp"

namespace microstat {

enum class PermutationScheme { free, within_block };

struct PermTestResult {
  double statistic_observed = 0.0;
  double p_value = 1.0;
  int n_perm = 0;
  PermutationScheme scheme = PermutationScheme::free;
  std::uint64_t seed = 0;
  bool tie_flagged = false; // MST had tied edge weights
};

namespace detail {

inline std::vector<int> encode_labels(const std::vector<std::string> &groups,
                                      int &n_levels) {
  std::map<std::string, int> level;
  std::vector<int> out;
  out.reserve(groups.size());
  for (const auto &g : groups) {
    auto [it, fresh] = level.emplace(g, static_cast<int>(level.size()));
    (void)fresh;
    out.push_back(it->second);
  }
  n_levels = static_cast<int>(level.size());
  return out;
}

// indices grouped by block for within-block shuffling
inline std::vector<std::vector<std::size_t>>
block_index(const std::vector<std::string> &blocks) {
  std::map<std::string, std::vector<std::size_t>> by;
  for (std::size_t j = 0; j < blocks.size(); ++j) by[blocks[j]].push_back(j);
  std::vector<std::vector<std::size_t>> out;
  for (auto &[k, v] : by) out.push_back(std::move(v));
  return out;
}

inline void permute_labels(Pcg32 &g, std::vector<int> &labels,
                           const std::vector<std::vector<std::size_t>> &blocks) {
  if (blocks.empty()) {
    shuffle(g, labels);
    return;
  }
  for (const auto &idx : blocks) {
    for (std::size_t i = idx.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(g.bounded(i));
      std::swap(labels[idx[i - 1]], labels[idx[j]]);
    }
  }
}

struct PermanovaWork {
  const DistanceMatrix *d;
  std::vector<double> d2;     // squared distances
  double ss_total = 0.0;
  int n_levels = 0;

  double pseudo_f(const std::vector<int> &labels) const {
    const std::size_t n = d->size();
    std::vector<double> within(static_cast<std::size_t>(n_levels), 0.0);
    std::vector<double> count(static_cast<std::size_t>(n_levels), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      count[static_cast<std::size_t>(labels[j])] += 1.0;
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k)
        if (labels[j] == labels[k])
          within[static_cast<std::size_t>(labels[j])] += d2[j * n + k];
    double ss_within = 0.0;
    for (int a = 0; a < n_levels; ++a)
      ss_within += within[static_cast<std::size_t>(a)] /
                   count[static_cast<std::size_t>(a)];
    const double df1 = static_cast<double>(n_levels - 1);
    const double df2 = static_cast<double>(n) - static_cast<double>(n_levels);
    if (ss_within <= 0.0)
      return std::numeric_limits<double>::infinity();
    return ((ss_total - ss_within) / df1) / (ss_within / df2);
  }
};

} // namespace detail

// One-factor PERMANOVA with pseudo-F and label permutations, free or
// restricted to blocks (nested designs).
inline PermTestResult permanova(const DistanceMatrix &d,
                                const std::vector<std::string> &groups,
                                int n_perm, std::uint64_t seed,
                                const std::vector<std::string> *blocks =
                                    nullptr) {
  const std::size_t n = d.size();
  if (groups.size() != n)
    throw data_error("permanova: group labels must match specimens");
  detail::PermanovaWork work;
  work.d = &d;
  std::vector<int> labels = detail::encode_labels(groups, work.n_levels);
  if (work.n_levels < 2) throw data_error("permanova: need at least 2 groups");
  {
    std::vector<int> sizes(static_cast<std::size_t>(work.n_levels), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    for (int s : sizes)
      if (s < 2)
        throw data_error("permanova: every group needs at least 2 specimens");
  }
  std::vector<std::vector<std::size_t>> block_idx;
  if (blocks) {
    if (blocks->size() != n)
      throw data_error("permanova: block labels must match specimens");
    block_idx = detail::block_index(*blocks);
    bool movable = false;
    for (const auto &b : block_idx) movable = movable || b.size() > 1;
    if (!movable)
      throw data_error("permanova: blocks are singletons; within-block "
                       "permutation cannot move any label");
  }

  work.d2.resize(n * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k)
      work.d2[j * n + k] = d.at(j, k) * d.at(j, k);
  work.ss_total = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = j + 1; k < n; ++k) work.ss_total += work.d2[j * n + k];
  work.ss_total /= static_cast<double>(n);

  PermTestResult res;
  res.n_perm = n_perm;
  res.seed = seed;
  res.scheme =
      blocks ? PermutationScheme::within_block : PermutationScheme::free;
  res.statistic_observed = work.pseudo_f(labels);

  Pcg32 g = Pcg32::substream(seed, 0);
  int exceed = 0;
  std::vector<int> perm = labels;
  for (int r = 0; r < n_perm; ++r) {
    detail::permute_labels(g, perm, block_idx);
    if (work.pseudo_f(perm) >= res.statistic_observed) ++exceed;
  }
  res.p_value = (1.0 + exceed) / (n_perm + 1.0);
  return res;
}

namespace detail {

// Deterministic MST by Prim with lexicographic tie-breaking; reports
// whether any accepted edge weight was tied.
inline std::vector<std::pair<std::size_t, std::size_t>>
minimum_spanning_tree(const DistanceMatrix &d, bool &tied) {
  const std::size_t n = d.size();
  std::vector<char> in_tree(n, 0);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> parent(n, 0);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  in_tree[0] = 1;
  for (std::size_t j = 1; j < n; ++j) {
    best[j] = d.at(0, j);
    parent[j] = 0;
  }
  tied = false;
  for (std::size_t it = 1; it < n; ++it) {
    std::size_t pick = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (in_tree[j]) continue;
      if (pick == n) {
        pick = j;
        continue;
      }
      // lexicographic order on (weight, parent, node)
      if (best[j] < best[pick] ||
          (best[j] == best[pick] &&
           (parent[j] < parent[pick] ||
            (parent[j] == parent[pick] && j < pick))))
        pick = j;
    }
    for (std::size_t j = 0; j < n; ++j)
      if (!in_tree[j] && j != pick && best[j] == best[pick]) tied = true;
    in_tree[pick] = 1;
    edges.emplace_back(std::min(parent[pick], pick),
                       std::max(parent[pick], pick));
    for (std::size_t j = 0; j < n; ++j)
      if (!in_tree[j] && d.at(pick, j) < best[j]) {
        best[j] = d.at(pick, j);
        parent[j] = pick;
      }
  }
  return edges;
}

} // namespace detail

// Two-sample test on the count of MST edges joining same-group specimens
// ("pure edges"): clustering by group inflates the count.
inline PermTestResult mst_pure_edge_test(const DistanceMatrix &d,
                                         const std::vector<std::string> &groups,
                                         int n_perm, std::uint64_t seed) {
  const std::size_t n = d.size();
  if (groups.size() != n)
    throw data_error("mst_pure_edge_test: group labels must match specimens");
  int n_levels = 0;
  std::vector<int> labels = detail::encode_labels(groups, n_levels);
  if (n_levels != 2)
    throw data_error("mst_pure_edge_test: exactly 2 groups required");

  PermTestResult res;
  res.n_perm = n_perm;
  res.seed = seed;
  const auto edges = detail::minimum_spanning_tree(d, res.tie_flagged);
  auto pure_count = [&](const std::vector<int> &lab) {
    int c = 0;
    for (const auto &[a, b] : edges)
      if (lab[a] == lab[b]) ++c;
    return c;
  };
  const int obs = pure_count(labels);
  res.statistic_observed = static_cast<double>(obs);

  Pcg32 g = Pcg32::substream(seed, 0);
  int exceed = 0;
  std::vector<int> perm = labels;
  for (int r = 0; r < n_perm; ++r) {
    shuffle(g, perm);
    if (pure_count(perm) >= obs) ++exceed;
  }
  res.p_value = (1.0 + exceed) / (n_perm + 1.0);
  return res;
}

struct ThresholdNetwork {
  std::vector<std::pair<std::size_t, std::size_t>> edges; // j < k
  std::vector<int> component; // component id per specimen
  int n_components = 0;
};

// Undirected graph with an edge wherever d <= max_d, plus its connected
// components.
inline ThresholdNetwork threshold_network(const DistanceMatrix &d,
                                          double max_d) {
  if (!(max_d > 0.0))
    throw data_error("threshold_network: max_d must be positive");
  const std::size_t n = d.size();
  ThresholdNetwork out;
  std::vector<std::size_t> root(n);
  std::iota(root.begin(), root.end(), 0);
  auto find = [&](std::size_t x) {
    while (root[x] != x) {
      root[x] = root[root[x]];
      x = root[x];
    }
    return x;
  };
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = j + 1; k < n; ++k)
      if (d.at(j, k) <= max_d) {
        out.edges.emplace_back(j, k);
        root[find(j)] = find(k);
      }
  out.component.assign(n, -1);
  std::map<std::size_t, int> ids;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t r = find(j);
    auto [it, fresh] = ids.emplace(r, static_cast<int>(ids.size()));
    (void)fresh;
    out.component[j] = it->second;
  }
  out.n_components = static_cast<int>(ids.size());
  return out;
}

struct PowerCurve {
  std::string scenario;
  std::vector<double> grid;   // switch fractions
  std::vector<double> power;  // rejection rate at alpha
  std::vector<double> mc_se;
  int n_replicates = 0;
  double alpha = 0.05;
};

struct PowerOptions {
  int n_perm = 199;
  double alpha = 0.05;
  Metric metric = Metric::bray_curtis;
};

// Matched power curves with and without strain switching. Replicate r at
// every grid point reuses the same derived seed, so count draws are
// identical across arms and grid values; only the labels move.
inline std::pair<PowerCurve, PowerCurve>
strain_switch_power(const SimScenario &base, const std::vector<double> &grid,
                    int n_replicates, std::uint64_t seed,
                    PowerOptions opts = {}) {
  if (base.switch_pairs.empty())
    throw data_error("strain_switch_power: scenario has no switch pairs");
  if (base.n_group1 < 2 || base.n_group2 < 2)
    throw data_error("strain_switch_power: need 2 specimens per group");
  PowerCurve with, without;
  with.grid = without.grid = grid;
  with.n_replicates = without.n_replicates = n_replicates;
  with.alpha = without.alpha = opts.alpha;
  with.scenario = "switched";
  without.scenario = "unswitched";

  std::vector<std::string> groups;
  for (std::size_t j = 0; j < base.n_group1 + base.n_group2; ++j)
    groups.push_back(j < base.n_group1 ? base.group1_label
                                       : base.group2_label);

  for (double f : grid) {
    std::vector<int> rej_with(static_cast<std::size_t>(n_replicates), 0);
    std::vector<int> rej_without(static_cast<std::size_t>(n_replicates), 0);
    parallel_for(static_cast<std::size_t>(n_replicates), [&](std::size_t r) {
      SimScenario sw = base;
      sw.seed = derive_seed(seed, r);
      sw.switch_fraction = f;
      SimScenario un = sw;
      un.switch_pairs.clear();
      const std::uint64_t perm_seed = derive_seed(seed, (1ULL << 40) + r);
      const auto run = [&](const SimScenario &sc) {
        const auto data = simulate(sc);
        const auto d = distance_matrix(data.counts, opts.metric);
        return permanova(d, groups, opts.n_perm, perm_seed).p_value;
      };
      rej_with[r] = run(sw) <= opts.alpha ? 1 : 0;
      rej_without[r] = run(un) <= opts.alpha ? 1 : 0;
    });
    const auto rate = [&](const std::vector<int> &rej) {
      double s = 0.0;
      for (int v : rej) s += v;
      return s / static_cast<double>(n_replicates);
    };
    const double pw = rate(rej_with), pu = rate(rej_without);
    with.power.push_back(pw);
    without.power.push_back(pu);
    with.mc_se.push_back(
        std::sqrt(pw * (1.0 - pw) / static_cast<double>(n_replicates)));
    without.mc_se.push_back(
        std::sqrt(pu * (1.0 - pu) / static_cast<double>(n_replicates)));
  }
  return {with, without};
}

} // namespace microstat

#endif
