#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stemalt/character_matrix.h"
#include "stemalt/ctmc.h"
#include "stemalt/regime.h"

namespace stemalt {

// Per-tip state likelihoods keyed by taxon: one-hot when observed, all ones
// when missing.
using TipLikelihoods = std::map<std::string, Vector6>;

auto tip_vector(int cell) -> Vector6;  // cell is a state index or k_missing
auto tip_likelihoods(const CharacterMatrix& data, int verb) -> TipLikelihoods;

enum class RootPrior {
  uniform_all,     // 1/6 over every state including DEAD
  uniform_living   // 1/5 over the living states
};
auto root_prior_vector(RootPrior prior) -> Vector6;

// Flattened post-order evaluation schedule for one painted tree.  Branch
// segments are stored per node from the parent end to the child end; the
// likelihood is propagated child-upward, so the tipward segment is applied
// first.
class PruningPlan {
 public:
  struct Segment {
    double length;
    Regime regime;
  };
  struct Step {
    Node_index node;
    int first_child;      // offset into child_list
    int num_children;
    int first_segment;    // segments of the branch above `node`
    int num_segments;
    int tip_slot;         // index into the tip vector span, -1 for internal nodes
  };

  PruningPlan() = default;
  // `taxa` fixes the order of tip slots; every tree tip must appear in it.
  PruningPlan(const PaintedTree& painted, const std::vector<std::string>& taxa);

  auto steps() const -> const std::vector<Step>& { return steps_; }
  auto segments() const -> const std::vector<Segment>& { return segments_; }
  auto num_segments() const -> int { return static_cast<int>(segments_.size()); }
  auto num_tip_slots() const -> int { return num_slots_; }
  // Tip slot i reads column slot_column()[i] of the character matrix.
  auto slot_column() const -> const std::vector<int>& { return slot_column_; }
  auto step_index_of_node(Node_index n) const -> int { return step_of_node_.at(n); }
  auto child_steps(const Step& s) const -> std::span<const int> {
    return {child_list_.data() + s.first_child, static_cast<std::size_t>(s.num_children)};
  }

 private:
  std::vector<Step> steps_;            // post-order; the root is last
  std::vector<int> child_list_;        // step indices
  std::vector<Segment> segments_;
  std::vector<int> slot_column_;
  std::vector<int> step_of_node_;
  int num_slots_ = 0;
};

// exp(Q_r * length) for every segment, indexed like plan.segments().
using SegmentMatrices = std::vector<Matrix6>;

// Recomputes the matrices of segments whose regime is selected by
// `regime_mask` (bit r set = regime r).
auto fill_segment_matrices(const PruningPlan& plan, const std::array<const RateMatrix*, 2>& by_regime,
                           SegmentMatrices& out, unsigned regime_mask = 0b11) -> void;

// Log-likelihood for one character.  `tips` is indexed by tip slot.  Partial
// likelihoods are rescaled at every internal node.
auto plan_log_likelihood(const PruningPlan& plan, const SegmentMatrices& matrices, std::span<const Vector6> tips,
                         const Vector6& root_prior) -> double;

// Root partial likelihood vector (scaled) and its log scale; used by
// ancestral reconstruction.
auto plan_root_partials(const PruningPlan& plan, const SegmentMatrices& matrices, std::span<const Vector6> tips,
                        double& log_scale) -> Vector6;

// Log P(tip data | Q_E, Q_N, painted tree).  Throws Error on taxon mismatch or
// a non-finite result.
auto prune_verb(const PaintedTree& painted, const RateMatrix& q_e, const RateMatrix& q_n, const TipLikelihoods& tips,
                const Vector6& root_prior) -> double;

// Tip vectors of every verb in slot order.
auto verb_tip_vectors(const PruningPlan& plan, const CharacterMatrix& data) -> std::vector<std::vector<Vector6>>;

}  // namespace stemalt
