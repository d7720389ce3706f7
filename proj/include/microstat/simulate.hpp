#ifndef MICROSTAT_SIMULATE_HPP
#define MICROSTAT_SIMULATE_HPP

// Generative NB simulator used by goodness-of-fit checks and the
// strain-switching power harness.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "microstat/dataset.hpp"
#include "microstat/errors.hpp"
#include "microstat/rng.hpp"

namespace microstat {

struct ScenarioTaxon {
  std::string id;
  double mu = 0.0;                 // group-1 mean intensity
  double k = 10.0;                 // dispersion
  std::optional<double> mu_group2; // group-2 mean; defaults to mu
  double contamination = 0.0;      // Poisson contaminant intensity
};

// Per-specimen depth multipliers d_j. fixed: every d_j = 1; nb: d_j is
// an NB(mean, k) library size divided by `mean`.
struct LibrarySizeModel {
  bool nb = false;
  double mean = 1.0;
  double k = 10.0;
};

struct SwitchPair {
  std::string taxon_a; // the biological signal
  std::string taxon_b; // the label it registers under after switching
};

// Which specimens are eligible to express the switched label. group2
// models a switch aligned with the comparison groups; all models
// subject-level strain variation cutting across both groups, the case
// that erodes distance-based test power.
enum class SwitchScope { group2, all };

struct SimScenario {
  std::vector<ScenarioTaxon> taxa;
  std::size_t n_group1 = 0;
  std::size_t n_group2 = 0;
  LibrarySizeModel library;
  std::vector<SwitchPair> switch_pairs;
  // Probability that an eligible specimen expresses the switched label.
  // 1.0 with the default scope reproduces the full group-2 switch.
  double switch_fraction = 1.0;
  SwitchScope switch_scope = SwitchScope::group2;
  std::uint64_t seed = 0;
  std::string group1_label = "g1";
  std::string group2_label = "g2";
};

namespace detail {

// stream-id namespaces keep count draws aligned across scenario variants
constexpr std::uint64_t kStreamCounts = 1ULL << 56;
constexpr std::uint64_t kStreamLibrary = 2ULL << 56;
constexpr std::uint64_t kStreamSwitch = 3ULL << 56;

} // namespace detail

// Draws K_ij ~ NB(mu_i d_j, k_i) + Poisson(contam_i d_j), applies strain
// switching to group-2 specimens, and returns a ready Dataset with group
// labels and the d_j used. Bit-identical for identical seeds; each
// (taxon, specimen) cell has its own RNG substream, so enabling or
// disabling switching relabels counts without changing the draws.
inline Dataset simulate(const SimScenario &sc) {
  const std::size_t m = sc.taxa.size();
  const std::size_t n = sc.n_group1 + sc.n_group2;
  if (m == 0 || n == 0)
    throw data_error("simulate: scenario needs taxa and specimens");
  if (!(sc.switch_fraction >= 0.0 && sc.switch_fraction <= 1.0))
    throw data_error("simulate: switch_fraction must be in [0,1]");

  std::unordered_map<std::string, std::size_t> taxon_index;
  for (std::size_t i = 0; i < m; ++i) {
    if (taxon_index.count(sc.taxa[i].id))
      throw data_error("simulate: duplicate taxon id '" + sc.taxa[i].id + "'");
    taxon_index[sc.taxa[i].id] = i;
  }

  std::unordered_set<std::size_t> switch_members;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto &p : sc.switch_pairs) {
    const auto a = taxon_index.find(p.taxon_a);
    const auto b = taxon_index.find(p.taxon_b);
    if (a == taxon_index.end() || b == taxon_index.end() ||
        a->second == b->second)
      throw data_error("simulate: invalid switch pair (" + p.taxon_a + ", " +
                       p.taxon_b + ")");
    if (!switch_members.insert(a->second).second ||
        !switch_members.insert(b->second).second)
      throw data_error("simulate: taxon reused across switch pairs");
    pairs.emplace_back(a->second, b->second);
  }

  Dataset out;
  out.counts.taxa_ids.reserve(m);
  for (const auto &t : sc.taxa) out.counts.taxa_ids.push_back(t.id);
  std::vector<double> d(n, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    const bool g2 = j >= sc.n_group1;
    out.counts.specimen_ids.push_back(
        (g2 ? "s2_" : "s1_") +
        std::to_string(g2 ? j - sc.n_group1 + 1 : j + 1));
    SampleInfo s;
    s.specimen_id = out.counts.specimen_ids.back();
    s.group = g2 ? sc.group2_label : sc.group1_label;
    out.samples.push_back(s);
    if (sc.library.nb) {
      Pcg32 g = Pcg32::substream(sc.seed, detail::kStreamLibrary + j);
      const auto size = rnbinom_mu(g, sc.library.mean, sc.library.k);
      d[j] = static_cast<double>(size < 1 ? 1 : size) / sc.library.mean;
    }
  }

  out.counts.counts.assign(m * n, 0);
  for (std::size_t i = 0; i < m; ++i) {
    const auto &t = sc.taxa[i];
    for (std::size_t j = 0; j < n; ++j) {
      Pcg32 g = Pcg32::substream(sc.seed, detail::kStreamCounts + i * n + j);
      const bool g2 = j >= sc.n_group1;
      const double mu = g2 && t.mu_group2 ? *t.mu_group2 : t.mu;
      std::int64_t k = mu > 0.0 ? rnbinom_mu(g, mu * d[j], t.k) : 0;
      if (t.contamination > 0.0) k += rpois(g, t.contamination * d[j]);
      out.counts.at(i, j) = k;
    }
  }

  // relabel switched signals; the alias row is empty elsewhere
  for (const auto &[a, b] : pairs) {
    for (std::size_t j = 0; j < n; ++j) {
      const bool eligible = sc.switch_scope == SwitchScope::all ||
                            j >= sc.n_group1;
      bool switched = false;
      if (eligible) {
        if (sc.switch_fraction >= 1.0) {
          switched = true;
        } else if (sc.switch_fraction > 0.0) {
          Pcg32 g = Pcg32::substream(sc.seed, detail::kStreamSwitch + j);
          switched = runif(g) < sc.switch_fraction;
        }
      }
      if (switched) {
        out.counts.at(b, j) = out.counts.at(a, j);
        out.counts.at(a, j) = 0;
      } else {
        out.counts.at(b, j) = 0;
      }
    }
  }

  out.size_factors = std::move(d);
  return out;
}

} // namespace microstat

#endif
