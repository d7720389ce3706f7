#ifndef MICROSTAT_DATASET_JSON_HPP
#define MICROSTAT_DATASET_JSON_HPP

// Self-describing JSON bundle for a Dataset and the simulation scenario
// schema. Field-by-field layout is documented in the README.

#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "microstat/dataset.hpp"
#include "microstat/errors.hpp"
#include "microstat/simulate.hpp"
#include "microstat/tree.hpp"

namespace microstat {

using json = nlohmann::json;

inline json dataset_to_json(const Dataset &d) {
  json out;
  out["format"] = "microstat.dataset";
  out["version"] = 1;
  out["taxa_ids"] = d.counts.taxa_ids;
  out["specimen_ids"] = d.counts.specimen_ids;
  json rows = json::array();
  for (std::size_t i = 0; i < d.counts.n_taxa(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < d.counts.n_specimens(); ++j)
      row.push_back(d.counts.at(i, j));
    rows.push_back(std::move(row));
  }
  out["counts"] = std::move(rows);
  json samples = json::array();
  for (const auto &s : d.samples) {
    json row;
    row["specimen_id"] = s.specimen_id;
    row["specimen_type"] = to_string(s.specimen_type);
    if (!s.subject_id.empty()) row["subject_id"] = s.subject_id;
    if (s.has_batch) row["batch"] = s.batch;
    if (!s.group.empty()) row["group"] = s.group;
    if (!s.pair_id.empty()) row["pair_id"] = s.pair_id;
    samples.push_back(std::move(row));
  }
  out["samples"] = std::move(samples);
  if (d.taxonomy) {
    json tax;
    tax["rank_names"] = d.taxonomy->rank_names;
    json trows = json::array();
    for (std::size_t i = 0; i < d.taxonomy->taxon_ids.size(); ++i) {
      json r;
      r["taxon_id"] = d.taxonomy->taxon_ids[i];
      r["ranks"] = d.taxonomy->assignments[i];
      trows.push_back(std::move(r));
    }
    tax["rows"] = std::move(trows);
    out["taxonomy"] = std::move(tax);
  }
  if (d.tree && !d.tree->empty()) out["tree_newick"] = write_newick(*d.tree);
  if (d.size_factors) out["size_factors"] = *d.size_factors;
  return out;
}

inline Dataset dataset_from_json(const json &in) {
  if (!in.is_object() || in.value("format", "") != "microstat.dataset")
    throw data_error("dataset json: missing format tag 'microstat.dataset'");
  Dataset d;
  try {
    d.counts.taxa_ids = in.at("taxa_ids").get<std::vector<std::string>>();
    d.counts.specimen_ids =
        in.at("specimen_ids").get<std::vector<std::string>>();
    const auto &rows = in.at("counts");
    if (rows.size() != d.counts.taxa_ids.size())
      throw data_error("dataset json: counts row count mismatch");
    for (const auto &row : rows) {
      if (row.size() != d.counts.specimen_ids.size())
        throw data_error("dataset json: ragged counts row");
      for (const auto &v : row)
        d.counts.counts.push_back(v.get<std::int64_t>());
    }
    for (const auto &s : in.at("samples")) {
      SampleInfo si;
      si.specimen_id = s.at("specimen_id").get<std::string>();
      si.specimen_type =
          specimen_type_from_string(s.at("specimen_type").get<std::string>());
      si.subject_id = s.value("subject_id", "");
      if (s.contains("batch")) {
        si.batch = s.at("batch").get<int>();
        si.has_batch = true;
      }
      si.group = s.value("group", "");
      si.pair_id = s.value("pair_id", "");
      d.samples.push_back(std::move(si));
    }
    if (in.contains("taxonomy")) {
      TaxonomyTable t;
      t.rank_names =
          in.at("taxonomy").at("rank_names").get<std::vector<std::string>>();
      for (const auto &r : in.at("taxonomy").at("rows")) {
        t.taxon_ids.push_back(r.at("taxon_id").get<std::string>());
        t.assignments.push_back(
            r.at("ranks").get<std::vector<std::string>>());
        if (t.assignments.back().size() != t.rank_names.size())
          throw data_error("dataset json: taxonomy rank count mismatch");
      }
      d.taxonomy = std::move(t);
    }
    if (in.contains("tree_newick"))
      d.tree = parse_newick(in.at("tree_newick").get<std::string>());
    if (in.contains("size_factors"))
      d.size_factors =
          in.at("size_factors").get<std::vector<double>>();
  } catch (const json::exception &e) {
    throw data_error(std::string("dataset json: ") + e.what());
  }
  return d;
}

inline void save_dataset(const Dataset &d, const std::string &path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write '" + path + "'");
  out << dataset_to_json(d).dump(1) << '\n';
}

inline Dataset load_dataset(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot read '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception &e) {
    throw data_error("'" + path + "' is not valid JSON: " + e.what());
  }
  return dataset_from_json(j);
}

inline SimScenario scenario_from_json(const json &in) {
  if (!in.is_object() || in.value("format", "") != "microstat.scenario")
    throw data_error("scenario json: missing format tag "
                     "'microstat.scenario'");
  SimScenario sc;
  try {
    for (const auto &t : in.at("taxa")) {
      ScenarioTaxon tx;
      tx.id = t.at("id").get<std::string>();
      tx.mu = t.at("mu").get<double>();
      tx.k = t.at("k").get<double>();
      if (t.contains("mu_group2"))
        tx.mu_group2 = t.at("mu_group2").get<double>();
      tx.contamination = t.value("contamination", 0.0);
      sc.taxa.push_back(std::move(tx));
    }
    sc.n_group1 = in.at("n_group1").get<std::size_t>();
    sc.n_group2 = in.value("n_group2", std::size_t{0});
    if (in.contains("library_size")) {
      const auto &ls = in.at("library_size");
      const std::string type = ls.value("type", "fixed");
      if (type == "nb") {
        sc.library.nb = true;
        sc.library.mean = ls.at("mean").get<double>();
        sc.library.k = ls.value("k", 10.0);
      } else if (type != "fixed") {
        throw data_error("scenario json: library_size.type must be "
                         "'fixed' or 'nb'");
      }
    }
    if (in.contains("switch_pairs"))
      for (const auto &p : in.at("switch_pairs")) {
        if (!p.is_array() || p.size() != 2)
          throw data_error("scenario json: switch pairs are [a, b] arrays");
        sc.switch_pairs.push_back(
            {p[0].get<std::string>(), p[1].get<std::string>()});
      }
    sc.switch_fraction = in.value("switch_fraction", 1.0);
    const std::string scope = in.value("switch_scope", "group2");
    if (scope == "all")
      sc.switch_scope = SwitchScope::all;
    else if (scope != "group2")
      throw data_error("scenario json: switch_scope must be 'group2' or "
                       "'all'");
    sc.seed = in.value("seed", std::uint64_t{0});
    if (in.contains("group_labels")) {
      const auto &gl = in.at("group_labels");
      if (!gl.is_array() || gl.size() != 2)
        throw data_error("scenario json: group_labels must hold 2 entries");
      sc.group1_label = gl[0].get<std::string>();
      sc.group2_label = gl[1].get<std::string>();
    }
  } catch (const json::exception &e) {
    throw data_error(std::string("scenario json: ") + e.what());
  }
  return sc;
}

inline SimScenario load_scenario(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot read '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception &e) {
    throw data_error("'" + path + "' is not valid JSON: " + e.what());
  }
  return scenario_from_json(j);
}

} // namespace microstat

#endif
