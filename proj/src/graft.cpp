#include "stemalt/graft.h"

#include <algorithm>

namespace stemalt {

namespace {

auto resolve_tip_age(const TimedTree& tree, const TipAge& age, std::mt19937_64& rng) -> double {
  if (age.reference_taxon.empty()) return age.fixed;
  auto center = tree.age(tree.tip(age.reference_taxon));
  auto jitter = std::uniform_real_distribution<double>{-age.relative_halfwidth, age.relative_halfwidth};
  return center * (1.0 + jitter(rng));
}

// Splits the branch above `below` at `age`, inserting a new node whose other
// child is a fresh tip.  Returns the modified node list.
auto split_branch(const TimedTree& tree, Node_index below, double attach_age, const std::string& taxon,
                  double tip_age) -> TimedTree {
  auto nodes = tree.nodes();
  auto above = nodes[below].parent;
  auto joint = static_cast<Node_index>(nodes.size());
  auto tip = joint + 1;

  auto joint_node = Node{};
  joint_node.parent = above;
  joint_node.length = tree.age(above) - attach_age;
  joint_node.children = {below, tip};
  nodes.push_back(joint_node);

  auto tip_node = Node{};
  tip_node.label = taxon;
  tip_node.parent = joint;
  tip_node.length = attach_age - tip_age;
  nodes.push_back(tip_node);

  // Keep the original depth of `below` exactly: its new length is what is
  // left of the old branch.
  nodes[below].length = nodes[below].length - joint_node.length;
  nodes[below].parent = joint;
  std::ranges::replace(nodes[above].children, below, joint);
  return TimedTree{std::move(nodes), tree.root()};
}

}  // namespace

auto graft_taxon(const TimedTree& tree, const GraftSpec& spec, std::mt19937_64& rng) -> TimedTree {
  if (spec.taxon.empty()) throw Error{"graft: new taxon needs a label"};
  if (tree.find_tip(spec.taxon)) throw Error{"graft: taxon '" + spec.taxon + "' already in tree"};

  Node_index below = k_no_node;
  double attach_age = 0.0;
  switch (spec.mode) {
    case GraftSpec::Mode::sister_to_mrca: {
      auto a = tree.find_tip(spec.anchor_a);
      auto b = tree.find_tip(spec.anchor_b);
      if (!a) throw Error{"graft: unknown anchor taxon '" + spec.anchor_a + "'"};
      if (!b) throw Error{"graft: unknown anchor taxon '" + spec.anchor_b + "'"};
      below = tree.mrca(*a, *b);
      if (below == tree.root()) throw Error{"graft: cannot attach above the root"};
      if (spec.attach_fraction < 0.0 || spec.attach_fraction > 1.0) {
        throw Error{"graft: attach_fraction must lie in [0, 1]"};
      }
      attach_age = tree.age(below) + spec.attach_fraction * tree.at(below).length;
      break;
    }
    case GraftSpec::Mode::child_of_taxon: {
      auto a = tree.find_tip(spec.anchor_a);
      if (!a) throw Error{"graft: unknown anchor taxon '" + spec.anchor_a + "'"};
      below = *a;
      if (spec.attach_offset < 0.0 || spec.attach_offset > tree.at(below).length) {
        throw Error{"graft: attach_offset must lie within the anchor's terminal branch"};
      }
      attach_age = tree.age(below) + spec.attach_offset;
      break;
    }
  }

  auto tip_age = resolve_tip_age(tree, spec.tip_age, rng);
  if (tip_age > attach_age) {
    throw Error{"graft: infeasible age for '" + spec.taxon + "': tip age " + std::to_string(tip_age) +
                " is older than the attachment point (" + std::to_string(attach_age) + ")"};
  }
  if (tip_age < 0.0) throw Error{"graft: tip age must be >= 0 (younger than the youngest tip)"};
  return split_branch(tree, below, attach_age, spec.taxon, tip_age);
}

}  // namespace stemalt
