#ifndef MICROSTAT_FILTER_HPP
#define MICROSTAT_FILTER_HPP

#include <cstdint>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "microstat/dataset.hpp"
#include "microstat/errors.hpp"

namespace microstat {

struct FilterSpec {
  std::int64_t min_reads_per_specimen = 800;
  std::int64_t min_count = 0;    // taxon kept if >= min_count reads ...
  std::int64_t min_specimens = 0; // ... in at least this many specimens
  // drop taxa whose assignment at a rank equals a value
  std::vector<std::pair<std::string, std::string>> drop_taxonomy;
  // drop taxa lacking an assignment at these ranks
  std::vector<std::string> require_rank;
  // manual exclusion (e.g. a known bad sequencing run's specimens)
  std::vector<std::string> drop_specimens;
};

// Applies the read-depth, prevalence and taxonomy screens; prunes the
// tree to the surviving taxa. The depth and prevalence screens interact
// (dropping taxa lowers library sizes, dropping specimens lowers
// prevalence), so they are iterated to a fixed point: the output itself
// satisfies both screens, which makes the filter idempotent.
inline Dataset filter_dataset(const Dataset &d, const FilterSpec &spec) {
  if (spec.min_reads_per_specimen < 0 || spec.min_count < 0 ||
      spec.min_specimens < 0)
    throw data_error("filter: thresholds must be non-negative");

  const auto &ct = d.counts;
  const std::size_t m = ct.n_taxa();
  const std::size_t n = ct.n_specimens();

  std::unordered_set<std::string> manual_drop(spec.drop_specimens.begin(),
                                              spec.drop_specimens.end());

  // taxonomy screens are static; evaluate once
  std::vector<char> taxonomy_ok(m, 1);
  for (std::size_t i = 0; i < m; ++i) {
    bool dropped = false;
    if (d.taxonomy && (!spec.drop_taxonomy.empty() ||
                       !spec.require_rank.empty())) {
      const int ti = d.taxonomy->taxon_index(ct.taxa_ids[i]);
      for (const auto &[rank, value] : spec.drop_taxonomy) {
        const int r = d.taxonomy->rank_index(rank);
        if (ti >= 0 && r >= 0 &&
            d.taxonomy->assignments[ti][static_cast<std::size_t>(r)] == value) {
          dropped = true;
          break;
        }
      }
      if (!dropped)
        for (const auto &rank : spec.require_rank) {
          const int r = d.taxonomy->rank_index(rank);
          const bool assigned =
              ti >= 0 && r >= 0 &&
              !d.taxonomy->assignments[ti][static_cast<std::size_t>(r)].empty();
          if (!assigned) {
            dropped = true;
            break;
          }
        }
    } else if (!spec.require_rank.empty() && !d.taxonomy) {
      dropped = true; // no taxonomy: required ranks cannot be satisfied
    }
    taxonomy_ok[i] = dropped ? 0 : 1;
  }

  std::vector<char> keep_i(m), keep_j(n);
  for (std::size_t i = 0; i < m; ++i) keep_i[i] = taxonomy_ok[i];
  for (std::size_t j = 0; j < n; ++j)
    keep_j[j] = manual_drop.count(ct.specimen_ids[j]) ? 0 : 1;

  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (!keep_j[j]) continue;
      std::int64_t total = 0;
      for (std::size_t i = 0; i < m; ++i)
        if (keep_i[i]) total += ct.at(i, j);
      if (total < spec.min_reads_per_specimen) {
        keep_j[j] = 0;
        changed = true;
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      if (!keep_i[i]) continue;
      std::int64_t hits = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (keep_j[j] && ct.at(i, j) >= spec.min_count) ++hits;
      if (hits < spec.min_specimens) {
        keep_i[i] = 0;
        changed = true;
      }
    }
  }

  std::vector<std::size_t> keep_specimens, keep_taxa;
  for (std::size_t j = 0; j < n; ++j)
    if (keep_j[j]) keep_specimens.push_back(j);
  for (std::size_t i = 0; i < m; ++i)
    if (keep_i[i]) keep_taxa.push_back(i);
  if (keep_specimens.empty())
    throw data_error("filter: no specimens survive the read threshold");
  if (keep_taxa.empty())
    throw data_error("filter: no taxa survive the filter");

  Dataset out;
  out.counts.taxa_ids.reserve(keep_taxa.size());
  for (std::size_t i : keep_taxa) out.counts.taxa_ids.push_back(ct.taxa_ids[i]);
  for (std::size_t j : keep_specimens)
    out.counts.specimen_ids.push_back(ct.specimen_ids[j]);
  out.counts.counts.reserve(keep_taxa.size() * keep_specimens.size());
  for (std::size_t i : keep_taxa)
    for (std::size_t j : keep_specimens)
      out.counts.counts.push_back(ct.at(i, j));

  std::unordered_set<std::string> kept_ids(out.counts.specimen_ids.begin(),
                                           out.counts.specimen_ids.end());
  for (const auto &s : d.samples)
    if (kept_ids.count(s.specimen_id)) out.samples.push_back(s);

  if (d.taxonomy) {
    TaxonomyTable t;
    t.rank_names = d.taxonomy->rank_names;
    for (const auto &id : out.counts.taxa_ids) {
      const int ti = d.taxonomy->taxon_index(id);
      if (ti < 0) continue;
      t.taxon_ids.push_back(id);
      t.assignments.push_back(d.taxonomy->assignments[ti]);
    }
    out.taxonomy = std::move(t);
  }

  if (d.tree && !d.tree->empty()) {
    std::set<std::string> keep(out.counts.taxa_ids.begin(),
                               out.counts.taxa_ids.end());
    out.tree = prune_tree(*d.tree, keep);
  }

  if (d.size_factors) {
    std::vector<double> sf;
    for (std::size_t j : keep_specimens) sf.push_back((*d.size_factors)[j]);
    out.size_factors = std::move(sf);
  }
  return out;
}

} // namespace microstat

#endif
