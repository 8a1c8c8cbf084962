#pragma once

#include <random>
#include <string>

#include "stemalt/tree.h"

namespace stemalt {

// Age of the grafted tip, in the tree's time units before the youngest tip.
// Either fixed, or jittered uniformly within +-relative_halfwidth of the age of
// a reference tip.
struct TipAge {
  double fixed = 0.0;
  std::string reference_taxon;      // non-empty selects the jittered form
  double relative_halfwidth = 0.1;

  static auto at(double age) -> TipAge { return {age, {}, 0.0}; }
  static auto around(std::string taxon, double halfwidth = 0.1) -> TipAge {
    return {0.0, std::move(taxon), halfwidth};
  }
};

struct GraftSpec {
  enum class Mode {
    sister_to_mrca,  // new lineage splits off the branch above MRCA(anchor_a, anchor_b)
    child_of_taxon   // new lineage splits off the terminal branch of anchor_a
  };

  std::string taxon;
  Mode mode = Mode::sister_to_mrca;
  std::string anchor_a;
  std::string anchor_b;
  // sister_to_mrca: attachment point as a fraction of the branch above the
  // MRCA (0 = at the MRCA, 1 = at its parent).
  double attach_fraction = 0.5;
  // child_of_taxon: how far above the anchor tip the new lineage splits off.
  double attach_offset = 0.0;
  TipAge tip_age;
};

// Returns a new tree with `spec.taxon` attached.  Root-to-tip distances of
// existing tips are unchanged.  Throws Error on unknown anchors, a duplicate
// taxon, or a tip age older than the attachment point.
auto graft_taxon(const TimedTree& tree, const GraftSpec& spec, std::mt19937_64& rng) -> TimedTree;

}  // namespace stemalt
