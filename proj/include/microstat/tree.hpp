#ifndef MICROSTAT_TREE_HPP
#define MICROSTAT_TREE_HPP

#include <cctype>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "microstat/errors.hpp"

namespace microstat {

struct PhyloNode {
  int parent = -1;             // -1 for the root
  double branch_length = 0.0;  // length of the edge above this node
  std::string label;           // leaf label; may be empty on internal nodes
  std::vector<int> children;
};

// Rooted tree with branch lengths. Node 0 is always the root.
struct PhyloTree {
  std::vector<PhyloNode> nodes;

  bool empty() const { return nodes.empty(); }
  std::size_t size() const { return nodes.size(); }
  bool is_leaf(int i) const { return nodes[i].children.empty(); }

  std::vector<int> leaf_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (is_leaf(static_cast<int>(i))) out.push_back(static_cast<int>(i));
    return out;
  }

  std::vector<std::string> leaf_labels() const {
    std::vector<std::string> out;
    for (int i : leaf_indices()) out.push_back(nodes[i].label);
    return out;
  }

  // Sum of branch lengths from the node up to (but excluding) the root.
  double depth(int i) const {
    double d = 0.0;
    for (int n = i; nodes[n].parent != -1; n = nodes[n].parent)
      d += nodes[n].branch_length;
    return d;
  }

  // Path length between two nodes through their common ancestor.
  double path_length(int a, int b) const {
    std::unordered_map<int, double> up;
    double d = 0.0;
    for (int n = a; n != -1; n = nodes[n].parent) {
      up[n] = d;
      d += nodes[n].branch_length;
    }
    d = 0.0;
    for (int n = b; n != -1; n = nodes[n].parent) {
      auto it = up.find(n);
      if (it != up.end()) return d + it->second;
      d += nodes[n].branch_length;
    }
    throw numeric_error("path_length: nodes share no ancestor");
  }

  int find_leaf(const std::string &label) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (is_leaf(static_cast<int>(i)) && nodes[i].label == label)
        return static_cast<int>(i);
    return -1;
  }
};

namespace detail {

class NewickParser {
public:
  explicit NewickParser(const std::string &text) : text_(text) {}

  PhyloTree parse() {
    PhyloTree tree;
    skip_space();
    parse_node(tree, -1);
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != ';')
      fail("expected ';' terminating the tree");
    ++pos_;
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters after ';'");
    check_duplicate_leaves(tree);
    return tree;
  }

private:
  const std::string &text_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string &msg) const {
    throw parse_error("newick: " + msg, 1, pos_ + 1);
  }

  void skip_space() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  int parse_node(PhyloTree &tree, int parent) {
    const int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[idx].parent = parent;
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      ++pos_;
      for (;;) {
        const int child = parse_node(tree, idx);
        tree.nodes[idx].children.push_back(child);
        skip_space();
        if (pos_ >= text_.size()) fail("unbalanced parenthesis");
        if (text_[pos_] == ',') {
          ++pos_;
          continue;
        }
        if (text_[pos_] == ')') {
          ++pos_;
          break;
        }
        fail("expected ',' or ')'");
      }
    }
    tree.nodes[idx].label = parse_label();
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == ':') {
      ++pos_;
      tree.nodes[idx].branch_length = parse_number();
      if (!(tree.nodes[idx].branch_length >= 0.0) ||
          !std::isfinite(tree.nodes[idx].branch_length))
        fail("branch length must be finite and non-negative");
    }
    return idx;
  }

  std::string parse_label() {
    skip_space();
    if (pos_ < text_.size() && (text_[pos_] == '\'' || text_[pos_] == '"')) {
      const char quote = text_[pos_++];
      std::string out;
      while (pos_ < text_.size() && text_[pos_] != quote) out += text_[pos_++];
      if (pos_ >= text_.size()) fail("unterminated quoted label");
      ++pos_;
      return out;
    }
    std::string out;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ':' || c == ',' || c == ')' || c == '(' || c == ';' ||
          std::isspace(static_cast<unsigned char>(c)))
        break;
      out += c;
      ++pos_;
    }
    return out;
  }

  double parse_number() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' ||
          c == '-' || c == '+' || c == 'e' || c == 'E')
        ++pos_;
      else
        break;
    }
    if (start == pos_) fail("expected a branch length after ':'");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text_.substr(start, pos_ - start), &used);
    } catch (const std::exception &) {
      fail("malformed branch length");
    }
    if (used != pos_ - start) fail("malformed branch length");
    return v;
  }

  void check_duplicate_leaves(const PhyloTree &tree) const {
    std::set<std::string> seen;
    for (const auto &n : tree.nodes) {
      if (!n.children.empty() || n.label.empty()) continue;
      if (!seen.insert(n.label).second)
        throw data_error("newick: duplicate leaf label '" + n.label + "'");
    }
  }
};

inline void write_newick_node(const PhyloTree &tree, int idx,
                              std::string &out) {
  const auto &n = tree.nodes[idx];
  if (!n.children.empty()) {
    out += '(';
    for (std::size_t c = 0; c < n.children.size(); ++c) {
      if (c) out += ',';
      write_newick_node(tree, n.children[c], out);
    }
    out += ')';
  }
  out += n.label;
  out += ':';
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", n.branch_length);
  out += buf;
}

} // namespace detail

inline PhyloTree parse_newick(const std::string &text) {
  return detail::NewickParser(text).parse();
}

inline std::string write_newick(const PhyloTree &tree) {
  if (tree.empty()) return ";";
  std::string out;
  detail::write_newick_node(tree, 0, out);
  out += ';';
  return out;
}

// Keep only the leaves in `keep`; interior nodes left childless are removed
// and unary chains are collapsed, their branch lengths summed.
inline PhyloTree prune_tree(const PhyloTree &tree,
                            const std::set<std::string> &keep) {
  if (tree.empty()) return tree;
  const std::size_t n = tree.size();
  std::vector<char> keep_node(n, 0);
  // mark leaves to keep, then propagate to ancestors
  for (std::size_t i = 0; i < n; ++i) {
    if (tree.is_leaf(static_cast<int>(i)) && keep.count(tree.nodes[i].label)) {
      for (int a = static_cast<int>(i); a != -1; a = tree.nodes[a].parent)
        keep_node[a] = 1;
    }
  }
  if (!keep_node[0]) return PhyloTree{};

  PhyloTree out;
  // new root
  out.nodes.emplace_back();
  out.nodes[0].label = tree.nodes[0].label;
  out.nodes[0].branch_length = tree.nodes[0].branch_length;

  // depth-first copy with unary collapsing
  struct Frame {
    int old_node;
    int new_parent;
    double carried; // branch length accumulated over collapsed unary nodes
  };
  std::vector<Frame> stack;
  for (auto it = tree.nodes[0].children.rbegin();
       it != tree.nodes[0].children.rend(); ++it)
    if (keep_node[*it]) stack.push_back({*it, 0, 0.0});

  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    const auto &src = tree.nodes[f.old_node];
    std::vector<int> kept_children;
    for (int c : src.children)
      if (keep_node[c]) kept_children.push_back(c);
    if (kept_children.size() == 1 && src.label.empty()) {
      // unary internal node: collapse into the child's branch
      stack.push_back({kept_children[0], f.new_parent,
                       f.carried + src.branch_length});
      continue;
    }
    const int idx = static_cast<int>(out.nodes.size());
    out.nodes.emplace_back();
    out.nodes[idx].parent = f.new_parent;
    out.nodes[idx].label = src.label;
    out.nodes[idx].branch_length = src.branch_length + f.carried;
    out.nodes[f.new_parent].children.push_back(idx);
    for (auto it = kept_children.rbegin(); it != kept_children.rend(); ++it)
      stack.push_back({*it, idx, 0.0});
  }
  return out;
}

} // namespace microstat

#endif
