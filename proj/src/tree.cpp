#include "stemalt/tree.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

namespace stemalt {

TimedTree::TimedTree(std::vector<Node> nodes, Node_index root) : nodes_{std::move(nodes)}, root_{root} {
  auto n = size();
  if (n == 0) throw Error{"tree has no nodes"};
  if (root_ < 0 || root_ >= n) throw Error{"root index out of range"};
  if (nodes_[root_].parent != k_no_node) throw Error{"root has a parent"};

  for (auto i = 0; i != n; ++i) {
    const auto& node = nodes_[i];
    if (!std::isfinite(node.length) || node.length < 0.0) {
      throw Error{"branch length must be finite and >= 0 (node '" + node.label + "')"};
    }
    if (i != root_ && (node.parent < 0 || node.parent >= n)) {
      throw Error{"non-root node without a valid parent"};
    }
    for (auto c : node.children) {
      if (c < 0 || c >= n || nodes_[c].parent != i) throw Error{"inconsistent parent/child links"};
    }
  }

  // Iterative DFS from the root; every node must be reached exactly once.
  depth_.assign(n, 0.0);
  auto seen = std::vector<bool>(n, false);
  auto stack = std::vector<std::pair<Node_index, bool>>{{root_, false}};
  while (!stack.empty()) {
    auto [i, expanded] = stack.back();
    stack.pop_back();
    if (expanded) {
      postorder_.push_back(i);
      continue;
    }
    if (seen[i]) throw Error{"cycle or shared child in tree"};
    seen[i] = true;
    stack.push_back({i, true});
    for (auto it = nodes_[i].children.rbegin(); it != nodes_[i].children.rend(); ++it) {
      depth_[*it] = depth_[i] + nodes_[*it].length;
      stack.push_back({*it, false});
    }
  }
  if (std::ssize(postorder_) != n) throw Error{"tree has nodes unreachable from the root"};

  auto labels = std::unordered_set<std::string>{};
  for (auto i : postorder_) {
    if (!nodes_[i].children.empty()) continue;
    tips_.push_back(i);
    const auto& label = nodes_[i].label;
    if (label.empty()) throw Error{"tip without a taxon label"};
    if (!labels.insert(label).second) throw Error{"duplicate tip label '" + label + "'"};
  }
  for (auto i : tips_) height_ = std::max(height_, depth_[i]);
}

auto TimedTree::tip_labels() const -> std::vector<std::string> {
  auto result = std::vector<std::string>{};
  for (auto i : tips_) result.push_back(nodes_[i].label);
  return result;
}

auto TimedTree::find_tip(std::string_view label) const -> std::optional<Node_index> {
  for (auto i : tips_) {
    if (nodes_[i].label == label) return i;
  }
  return std::nullopt;
}

auto TimedTree::tip(std::string_view label) const -> Node_index {
  auto i = find_tip(label);
  if (!i) throw Error{"unknown taxon '" + std::string{label} + "'"};
  return *i;
}

auto TimedTree::preorder() const -> std::vector<Node_index> {
  return {postorder_.rbegin(), postorder_.rend()};
}

auto TimedTree::total_length() const -> double {
  auto sum = 0.0;
  for (auto i = 0; i != size(); ++i) {
    if (i != root_) sum += nodes_[i].length;
  }
  return sum;
}

auto TimedTree::is_ancestor(Node_index anc, Node_index node) const -> bool {
  for (auto i = node; i != k_no_node; i = nodes_[i].parent) {
    if (i == anc) return true;
  }
  return false;
}

auto TimedTree::mrca(Node_index a, Node_index b) const -> Node_index {
  auto path = std::set<Node_index>{};
  for (auto i = a; i != k_no_node; i = nodes_[i].parent) path.insert(i);
  for (auto i = b; i != k_no_node; i = nodes_[i].parent) {
    if (path.contains(i)) return i;
  }
  throw Error{"nodes share no common ancestor"};
}

auto validate_tree_sample(const TreeSample& sample) -> void {
  if (sample.trees.empty()) throw Error{"tree sample is empty"};
  auto reference = sample.trees.front().tip_labels();
  std::ranges::sort(reference);
  for (const auto& tree : sample.trees) {
    auto labels = tree.tip_labels();
    std::ranges::sort(labels);
    if (labels != reference) throw Error{"trees in sample have different tip sets"};
  }
}

}  // namespace stemalt
