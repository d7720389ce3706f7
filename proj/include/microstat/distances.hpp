#ifndef MICROSTAT_DISTANCES_HPP
#define MICROSTAT_DISTANCES_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "microstat/dataset.hpp"
#include "microstat/errors.hpp"
#include "microstat/transforms.hpp"

namespace microstat {

enum class Metric { jaccard, bray_curtis, euclidean };

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::jaccard: return "jaccard";
    case Metric::bray_curtis: return "bray_curtis";
    case Metric::euclidean: return "euclidean";
  }
  return "?";
}

inline Metric metric_from_string(const std::string &s) {
  if (s == "jaccard") return Metric::jaccard;
  if (s == "bray" || s == "bray_curtis") return Metric::bray_curtis;
  if (s == "euclidean") return Metric::euclidean;
  throw data_error("unknown metric '" + s + "'");
}

struct DistanceMatrix {
  std::vector<std::string> ids;
  std::vector<double> d; // N x N row-major, symmetric, zero diagonal
  std::string metric_tag;
  bool auto_binarized = false;  // jaccard on non-binary input
  bool zero_sum_pair = false;   // bray-curtis saw an all-zero pair

  std::size_t size() const { return ids.size(); }
  double &at(std::size_t j, std::size_t k) { return d[j * ids.size() + k]; }
  double at(std::size_t j, std::size_t k) const {
    return d[j * ids.size() + k];
  }
};

// Pairwise distances between specimen columns of an m x N value matrix.
inline DistanceMatrix distance_matrix(const std::vector<double> &values,
                                      std::size_t m,
                                      const std::vector<std::string> &ids,
                                      Metric metric) {
  const std::size_t n = ids.size();
  if (n < 2) throw data_error("distance: need at least 2 specimens");
  if (values.size() != m * n) throw data_error("distance: shape mismatch");

  DistanceMatrix out;
  out.ids = ids;
  out.metric_tag = to_string(metric);
  out.d.assign(n * n, 0.0);

  std::vector<double> work = values;
  if (metric == Metric::jaccard) {
    bool binary = true;
    for (double v : values)
      if (v != 0.0 && v != 1.0) {
        binary = false;
        break;
      }
    if (!binary) {
      for (double &v : work) v = v >= 1.0 ? 1.0 : 0.0;
      out.auto_binarized = true;
    }
  }

  auto col = [&](std::size_t i, std::size_t j) { return work[i * n + j]; };
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      double dist = 0.0;
      switch (metric) {
        case Metric::euclidean: {
          double s = 0.0;
          for (std::size_t i = 0; i < m; ++i) {
            const double diff = col(i, a) - col(i, b);
            s += diff * diff;
          }
          dist = std::sqrt(s);
          break;
        }
        case Metric::bray_curtis: {
          double num = 0.0, den = 0.0;
          for (std::size_t i = 0; i < m; ++i) {
            num += std::fabs(col(i, a) - col(i, b));
            den += col(i, a) + col(i, b);
          }
          if (den == 0.0) {
            dist = 0.0;
            out.zero_sum_pair = true;
          } else {
            dist = num / den;
          }
          break;
        }
        case Metric::jaccard: {
          double inter = 0.0, uni = 0.0;
          for (std::size_t i = 0; i < m; ++i) {
            const bool xa = col(i, a) != 0.0;
            const bool xb = col(i, b) != 0.0;
            if (xa && xb) ++inter;
            if (xa || xb) ++uni;
          }
          dist = uni == 0.0 ? 0.0 : 1.0 - inter / uni;
          break;
        }
      }
      out.at(a, b) = out.at(b, a) = dist;
    }
  }
  return out;
}

inline DistanceMatrix distance_matrix(const CountTable &ct, Metric metric) {
  std::vector<double> v(ct.counts.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = static_cast<double>(ct.counts[i]);
  return distance_matrix(v, ct.n_taxa(), ct.specimen_ids, metric);
}

inline DistanceMatrix distance_matrix(const TransformedTable &t,
                                      Metric metric) {
  return distance_matrix(t.values, t.n_taxa(), t.specimen_ids, metric);
}

// UniFrac distances along a rooted tree. Weighted and unnormalized by
// default: D = sum_b l_b |p_A(b) - p_B(b)| over branches, where p(b) is
// the fraction of a specimen's reads descending from the branch. The
// normalized variant divides by sum_b l_b (p_A(b) + p_B(b)). Unweighted
// compares branch supports: unique branch length over shared-or-unique.
inline DistanceMatrix unifrac(const CountTable &ct, const PhyloTree &tree,
                              bool weighted, bool normalized = false) {
  const std::size_t n = ct.n_specimens();
  const std::size_t m = ct.n_taxa();
  if (n < 2) throw data_error("unifrac: need at least 2 specimens");
  if (tree.empty()) throw data_error("unifrac: empty tree");

  std::unordered_map<std::string, int> leaf_of;
  for (int i : tree.leaf_indices()) leaf_of[tree.nodes[i].label] = i;
  std::vector<int> taxon_node(m, -1);
  for (std::size_t i = 0; i < m; ++i) {
    const auto it = leaf_of.find(ct.taxa_ids[i]);
    if (it != leaf_of.end()) {
      taxon_node[i] = it->second;
      continue;
    }
    for (std::size_t j = 0; j < n; ++j)
      if (ct.at(i, j) > 0)
        throw data_error(
            "unifrac: taxon '" + ct.taxa_ids[i] +
            "' has reads but is not a tree leaf; prune it at ingest or "
            "supply a complete tree");
  }

  // children-before-parent order for upward accumulation
  const std::size_t nn = tree.size();
  std::vector<int> order;
  order.reserve(nn);
  {
    std::vector<int> stack{0};
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      order.push_back(v);
      for (int c : tree.nodes[v].children) stack.push_back(c);
    }
  }

  // per-specimen branch proportions
  std::vector<std::vector<double>> prop(n, std::vector<double>(nn, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    auto &p = prop[j];
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      if (taxon_node[i] >= 0 && ct.at(i, j) > 0) {
        p[static_cast<std::size_t>(taxon_node[i])] +=
            static_cast<double>(ct.at(i, j));
        total += static_cast<double>(ct.at(i, j));
      }
    if (total == 0.0)
      throw data_error("unifrac: specimen '" + ct.specimen_ids[j] +
                       "' has no reads on the tree");
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int v = *it;
      if (tree.nodes[v].parent >= 0)
        p[static_cast<std::size_t>(tree.nodes[v].parent)] +=
            p[static_cast<std::size_t>(v)];
    }
    for (double &x : p) x /= total;
  }

  DistanceMatrix out;
  out.ids = ct.specimen_ids;
  out.metric_tag = weighted
                       ? (normalized ? "unifrac_weighted_normalized"
                                     : "unifrac_weighted")
                       : "unifrac_unweighted";
  out.d.assign(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      double num = 0.0, den = 0.0;
      for (std::size_t v = 1; v < nn; ++v) { // skip the root's branch
        const double l = tree.nodes[v].branch_length;
        const double pa = prop[a][v], pb = prop[b][v];
        if (weighted) {
          num += l * std::fabs(pa - pb);
          den += l * (pa + pb);
        } else {
          const bool ia = pa > 0.0, ib = pb > 0.0;
          if (ia != ib) num += l;
          if (ia || ib) den += l;
        }
      }
      double dist;
      if (weighted)
        dist = normalized ? (den == 0.0 ? 0.0 : num / den) : num;
      else
        dist = den == 0.0 ? 0.0 : num / den;
      out.at(a, b) = out.at(b, a) = dist;
    }
  }
  return out;
}

} // namespace microstat

#endif
