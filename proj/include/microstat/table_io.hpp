#ifndef MICROSTAT_TABLE_IO_HPP
#define MICROSTAT_TABLE_IO_HPP

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "microstat/dataset.hpp"
#include "microstat/errors.hpp"

namespace microstat {

namespace detail {

inline std::vector<std::string> split_fields(const std::string &line,
                                             char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::int64_t parse_count_cell(const std::string &cell,
                                     const std::string &taxon,
                                     const std::string &specimen,
                                     std::size_t line, std::size_t col) {
  std::int64_t v = 0;
  const char *b = cell.data();
  const char *e = b + cell.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || ptr != e)
    throw parse_error("count for taxon '" + taxon + "', specimen '" +
                          specimen + "' is not an integer: '" + cell + "'",
                      line, col);
  if (v < 0)
    throw parse_error("count for taxon '" + taxon + "', specimen '" +
                          specimen + "' is negative",
                      line, col);
  return v;
}

} // namespace detail

// First row: specimen ids (first cell is a corner label and ignored).
// First column: taxon ids. Body: non-negative integers.
inline CountTable parse_count_table(std::istream &in, char delim = '\t') {
  CountTable ct;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line))
    throw parse_error("count table is empty", 1, 1);
  ++lineno;
  auto header = detail::split_fields(line, delim);
  if (header.size() < 2)
    throw parse_error("count table header needs at least one specimen", 1, 1);
  ct.specimen_ids.assign(header.begin() + 1, header.end());
  {
    std::unordered_set<std::string> seen;
    for (std::size_t j = 0; j < ct.specimen_ids.size(); ++j)
      if (!seen.insert(ct.specimen_ids[j]).second)
        throw parse_error("duplicate specimen id '" + ct.specimen_ids[j] + "'",
                          1, j + 2);
  }
  const std::size_t ncol = ct.specimen_ids.size();
  std::unordered_set<std::string> taxa_seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto fields = detail::split_fields(line, delim);
    if (fields.size() != ncol + 1)
      throw parse_error("ragged row: expected " + std::to_string(ncol + 1) +
                            " fields, found " + std::to_string(fields.size()),
                        lineno, 1);
    if (!taxa_seen.insert(fields[0]).second)
      throw parse_error("duplicate taxon id '" + fields[0] + "'", lineno, 1);
    ct.taxa_ids.push_back(fields[0]);
    for (std::size_t j = 0; j < ncol; ++j)
      ct.counts.push_back(detail::parse_count_cell(
          fields[j + 1], fields[0], ct.specimen_ids[j], lineno, j + 2));
  }
  if (ct.taxa_ids.empty())
    throw parse_error("count table has no taxon rows", lineno, 1);
  return ct;
}

inline void write_count_table(std::ostream &out, const CountTable &ct,
                              char delim = '\t') {
  out << "taxon_id";
  for (const auto &id : ct.specimen_ids) out << delim << id;
  out << '\n';
  for (std::size_t i = 0; i < ct.n_taxa(); ++i) {
    out << ct.taxa_ids[i];
    for (std::size_t j = 0; j < ct.n_specimens(); ++j)
      out << delim << ct.at(i, j);
    out << '\n';
  }
}

// Required columns: specimen_id, specimen_type. Optional: subject_id,
// batch, group, pair_id. Unknown columns are ignored.
inline std::vector<SampleInfo> parse_sample_table(std::istream &in,
                                                  char delim = '\t') {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line))
    throw parse_error("sample table is empty", 1, 1);
  ++lineno;
  auto header = detail::split_fields(line, delim);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char *req : {"specimen_id", "specimen_type"})
    if (!col.count(req))
      throw parse_error(std::string("sample table missing required column '") +
                            req + "'",
                        1, 1);
  std::vector<SampleInfo> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto fields = detail::split_fields(line, delim);
    if (fields.size() != header.size())
      throw parse_error("ragged row in sample table", lineno, 1);
    SampleInfo s;
    s.specimen_id = fields[col["specimen_id"]];
    try {
      s.specimen_type = specimen_type_from_string(fields[col["specimen_type"]]);
    } catch (const data_error &e) {
      throw parse_error(e.what(), lineno, col["specimen_type"] + 1);
    }
    if (auto it = col.find("subject_id"); it != col.end())
      s.subject_id = fields[it->second];
    if (auto it = col.find("group"); it != col.end())
      s.group = fields[it->second];
    if (auto it = col.find("pair_id"); it != col.end())
      s.pair_id = fields[it->second];
    if (auto it = col.find("batch"); it != col.end()) {
      const std::string &b = fields[it->second];
      if (!b.empty()) {
        try {
          s.batch = std::stoi(b);
          s.has_batch = true;
        } catch (const std::exception &) {
          throw parse_error("batch is not an integer: '" + b + "'", lineno,
                            it->second + 1);
        }
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

// First column: taxon_id; remaining columns are rank names. Empty cells
// and the literal "NA" mean unassigned.
inline TaxonomyTable parse_taxonomy_table(std::istream &in,
                                          char delim = '\t') {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line))
    throw parse_error("taxonomy table is empty", 1, 1);
  ++lineno;
  auto header = detail::split_fields(line, delim);
  if (header.empty() || header[0] != "taxon_id")
    throw parse_error("taxonomy table must start with a taxon_id column", 1,
                      1);
  TaxonomyTable t;
  t.rank_names.assign(header.begin() + 1, header.end());
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto fields = detail::split_fields(line, delim);
    if (fields.size() != header.size())
      throw parse_error("ragged row in taxonomy table", lineno, 1);
    t.taxon_ids.push_back(fields[0]);
    std::vector<std::string> ranks(fields.begin() + 1, fields.end());
    for (auto &r : ranks)
      if (r == "NA") r.clear();
    t.assignments.push_back(std::move(ranks));
  }
  return t;
}

} // namespace microstat

#endif
