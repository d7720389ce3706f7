#ifndef MICROSTAT_DATASET_HPP
#define MICROSTAT_DATASET_HPP

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "microstat/errors.hpp"
#include "microstat/tree.hpp"

namespace microstat {

// Dense taxa x specimen count matrix. Row/column order is preserved from
// ingestion and is the canonical order for every downstream output.
struct CountTable {
  std::vector<std::string> taxa_ids;     // m rows
  std::vector<std::string> specimen_ids; // N columns
  std::vector<std::int64_t> counts;      // row-major, m*N

  std::size_t n_taxa() const { return taxa_ids.size(); }
  std::size_t n_specimens() const { return specimen_ids.size(); }

  std::int64_t &at(std::size_t i, std::size_t j) {
    return counts[i * specimen_ids.size() + j];
  }
  std::int64_t at(std::size_t i, std::size_t j) const {
    return counts[i * specimen_ids.size() + j];
  }

  int specimen_index(const std::string &id) const {
    for (std::size_t j = 0; j < specimen_ids.size(); ++j)
      if (specimen_ids[j] == id) return static_cast<int>(j);
    return -1;
  }
  int taxon_index(const std::string &id) const {
    for (std::size_t i = 0; i < taxa_ids.size(); ++i)
      if (taxa_ids[i] == id) return static_cast<int>(i);
    return -1;
  }
};

enum class SpecimenType { biological, negative_control };

inline std::string to_string(SpecimenType t) {
  return t == SpecimenType::biological ? "biological" : "negative_control";
}

inline SpecimenType specimen_type_from_string(const std::string &s) {
  if (s == "biological") return SpecimenType::biological;
  if (s == "negative_control") return SpecimenType::negative_control;
  throw data_error("unknown specimen_type '" + s +
                   "' (expected biological or negative_control)");
}

struct SampleInfo {
  std::string specimen_id;
  SpecimenType specimen_type = SpecimenType::biological;
  std::string subject_id; // empty when absent
  int batch = 0;
  bool has_batch = false;
  std::string group;   // empty when absent
  std::string pair_id; // empty when absent
};

// Per-taxon assignments at ordered ranks (Kingdom..Genus or any subset).
struct TaxonomyTable {
  std::vector<std::string> rank_names;
  std::vector<std::string> taxon_ids;
  std::vector<std::vector<std::string>> assignments; // [taxon][rank], "" = NA

  int taxon_index(const std::string &id) const {
    for (std::size_t i = 0; i < taxon_ids.size(); ++i)
      if (taxon_ids[i] == id) return static_cast<int>(i);
    return -1;
  }
  int rank_index(const std::string &rank) const {
    for (std::size_t r = 0; r < rank_names.size(); ++r)
      if (rank_names[r] == rank) return static_cast<int>(r);
    return -1;
  }
};

struct Dataset {
  CountTable counts;
  std::vector<SampleInfo> samples;
  std::optional<TaxonomyTable> taxonomy;
  std::optional<PhyloTree> tree;
  std::optional<std::vector<double>> size_factors;

  const SampleInfo *sample_for(const std::string &specimen_id) const {
    for (const auto &s : samples)
      if (s.specimen_id == specimen_id) return &s;
    return nullptr;
  }

  std::vector<std::size_t> specimen_indices(SpecimenType type) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < counts.n_specimens(); ++j) {
      const SampleInfo *s = sample_for(counts.specimen_ids[j]);
      if (s && s->specimen_type == type) out.push_back(j);
    }
    return out;
  }
};

struct Violation {
  std::string rule;
  std::string id;     // offending identifier
  std::string detail;
};

namespace detail {

template <typename C>
inline void check_unique(const C &ids, const std::string &rule,
                         std::vector<Violation> &out) {
  std::unordered_set<std::string> seen;
  for (const auto &id : ids)
    if (!seen.insert(id).second) out.push_back({rule, id, "duplicate id"});
}

} // namespace detail

// Returns one entry per violated invariant; empty means the dataset is
// consistent. Violations are data, not errors.
inline std::vector<Violation> validate(const Dataset &d) {
  std::vector<Violation> out;
  const auto &ct = d.counts;

  if (ct.n_taxa() == 0)
    out.push_back({"counts.nonempty", "", "no taxa"});
  if (ct.n_specimens() == 0)
    out.push_back({"counts.nonempty", "", "no specimens"});
  detail::check_unique(ct.taxa_ids, "counts.unique_taxa", out);
  detail::check_unique(ct.specimen_ids, "counts.unique_specimens", out);
  if (ct.counts.size() != ct.n_taxa() * ct.n_specimens())
    out.push_back({"counts.shape", "",
                   "count buffer does not match identifier dimensions"});
  else
    for (std::size_t i = 0; i < ct.n_taxa(); ++i)
      for (std::size_t j = 0; j < ct.n_specimens(); ++j)
        if (ct.at(i, j) < 0)
          out.push_back({"counts.nonnegative", ct.taxa_ids[i],
                         "negative count in specimen " + ct.specimen_ids[j]});

  // sample metadata must match specimen columns exactly
  std::unordered_set<std::string> columns(ct.specimen_ids.begin(),
                                          ct.specimen_ids.end());
  std::unordered_set<std::string> listed;
  bool any_biological = false;
  for (const auto &s : d.samples) {
    if (!listed.insert(s.specimen_id).second)
      out.push_back({"samples.unique", s.specimen_id, "duplicate metadata row"});
    if (!columns.count(s.specimen_id))
      out.push_back({"samples.match_counts", s.specimen_id,
                     "metadata specimen absent from count table"});
    if (s.specimen_type == SpecimenType::biological) any_biological = true;
  }
  for (const auto &id : ct.specimen_ids)
    if (!listed.count(id))
      out.push_back({"samples.match_counts", id,
                     "count column has no metadata row"});
  if (!d.samples.empty() && !any_biological)
    out.push_back({"samples.biological", "",
                   "at least one biological specimen required"});

  if (d.taxonomy) {
    std::unordered_set<std::string> taxa(ct.taxa_ids.begin(),
                                         ct.taxa_ids.end());
    for (const auto &id : d.taxonomy->taxon_ids)
      if (!taxa.count(id))
        out.push_back({"taxonomy.subset", id,
                       "taxonomy row for unknown taxon"});
  }

  if (d.tree && !d.tree->empty()) {
    std::unordered_set<std::string> seen;
    int roots = 0;
    for (std::size_t i = 0; i < d.tree->size(); ++i) {
      const auto &n = d.tree->nodes[i];
      if (n.parent == -1) ++roots;
      if (!(n.branch_length >= 0.0) || !std::isfinite(n.branch_length))
        out.push_back({"tree.branch_lengths", n.label,
                       "branch length must be finite and >= 0"});
      if (d.tree->is_leaf(static_cast<int>(i)) && !n.label.empty() &&
          !seen.insert(n.label).second)
        out.push_back({"tree.unique_leaves", n.label, "duplicate leaf label"});
    }
    if (roots != 1)
      out.push_back({"tree.single_root", "",
                     std::to_string(roots) + " roots found"});
  }

  if (d.size_factors) {
    if (d.size_factors->size() != ct.n_specimens())
      out.push_back({"size_factors.length", "",
                     "size factor vector length != specimen count"});
    for (std::size_t j = 0; j < d.size_factors->size(); ++j)
      if (!((*d.size_factors)[j] > 0.0))
        out.push_back({"size_factors.positive",
                       j < ct.n_specimens() ? ct.specimen_ids[j] : "",
                       "size factor must be positive"});
  }
  return out;
}

// Column sums S_j in specimen order. Errors on an empty specimen.
inline std::vector<std::int64_t> library_sizes(const CountTable &ct) {
  std::vector<std::int64_t> out(ct.n_specimens(), 0);
  for (std::size_t i = 0; i < ct.n_taxa(); ++i)
    for (std::size_t j = 0; j < ct.n_specimens(); ++j) out[j] += ct.at(i, j);
  for (std::size_t j = 0; j < out.size(); ++j)
    if (out[j] == 0)
      throw data_error("library_sizes: specimen '" + ct.specimen_ids[j] +
                       "' has zero reads");
  return out;
}

} // namespace microstat

#endif
