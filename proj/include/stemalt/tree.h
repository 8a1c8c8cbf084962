#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stemalt {

// Base class for every error this library raises on bad input.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Node_index = int;
inline constexpr Node_index k_no_node = -1;

struct Node {
  std::string label;                // empty for unlabeled internal nodes
  Node_index parent = k_no_node;
  std::vector<Node_index> children;
  double length = 0.0;              // length of the branch above this node
  std::string annotation;           // raw `[&...]` payload, without brackets
};

// Rooted tree with branch lengths in time units.  Immutable once built;
// every constructor path goes through validation.
class TimedTree {
 public:
  TimedTree() = default;

  // Throws Error unless the nodes describe a single rooted tree with finite,
  // nonnegative branch lengths and unique tip labels.
  TimedTree(std::vector<Node> nodes, Node_index root);

  auto size() const -> int { return static_cast<int>(nodes_.size()); }
  auto root() const -> Node_index { return root_; }
  auto at(Node_index i) const -> const Node& { return nodes_.at(i); }
  auto nodes() const -> const std::vector<Node>& { return nodes_; }
  auto is_tip(Node_index i) const -> bool { return nodes_[i].children.empty(); }

  auto tips() const -> const std::vector<Node_index>& { return tips_; }
  auto tip_labels() const -> std::vector<std::string>;
  auto find_tip(std::string_view label) const -> std::optional<Node_index>;
  auto tip(std::string_view label) const -> Node_index;  // throws if absent

  // Children always appear before their parent.
  auto postorder() const -> const std::vector<Node_index>& { return postorder_; }
  auto preorder() const -> std::vector<Node_index>;

  // Root-to-node distance (the root branch itself is excluded).
  auto depth(Node_index i) const -> double { return depth_[i]; }
  auto height() const -> double { return height_; }
  // Time before the youngest tip: height() - depth(i).
  auto age(Node_index i) const -> double { return height_ - depth_[i]; }
  auto total_length() const -> double;

  auto mrca(Node_index a, Node_index b) const -> Node_index;
  // True if `anc` lies on the path from `node` to the root (inclusive).
  auto is_ancestor(Node_index anc, Node_index node) const -> bool;

 private:
  std::vector<Node> nodes_;
  Node_index root_ = k_no_node;
  std::vector<Node_index> tips_;
  std::vector<Node_index> postorder_;
  std::vector<double> depth_;
  double height_ = 0.0;
};

// A set of trees over the same taxa, e.g. draws from a posterior tree sample.
struct TreeSample {
  std::vector<TimedTree> trees;
  std::string provenance;
};

// Throws Error if the sample is empty or tip sets differ.
auto validate_tree_sample(const TreeSample& sample) -> void;

}  // namespace stemalt
