#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "stemalt/tree.h"

namespace stemalt {

// Regime of a branch segment: whether narrative past has been extended to the
// analytic perfect (E) or not (N).  The root is always N.
enum class Regime : int { N = 0, E = 1 };
inline constexpr int k_num_regimes = 2;

auto regime_name(Regime r) -> std::string_view;
auto parse_regime(std::string_view text) -> Regime;  // throws Error

// Binary TAM character observed at the tips.
struct TamObservation {
  std::map<std::string, Regime> by_taxon;
};

// Reads a two-column `taxon,state` CSV with state in {E, N}.
auto read_tam_csv(const std::string& path) -> TamObservation;
// Throws Error naming the first tip without an observation.
auto check_tam_coverage(const TimedTree& tree, const TamObservation& obs) -> void;

struct MkRates {
  double n_to_e = 0.0;
  double e_to_n = 0.0;
  double log_likelihood = 0.0;
};

inline constexpr double k_mk_rate_floor = 1e-8;
inline constexpr double k_mk_rate_ceiling = 1e4;

// Log-likelihood of the tip observations under a 2-state model with the root
// fixed at N.
auto binary_mk_log_likelihood(const TimedTree& tree, const TamObservation& obs, double n_to_e, double e_to_n)
    -> double;

// Maximum-likelihood rates (all-rates-different model, root fixed at N).
// Rates are kept within [k_mk_rate_floor, k_mk_rate_ceiling].  Throws Error if
// the optimizer does not converge.
auto fit_binary_mk(const TimedTree& tree, const TamObservation& obs) -> MkRates;

// Exact marginal P(E) at any point on the tree given all tip data and a root
// fixed at N.  Positions are (child node, fraction), fraction 0 being the
// parent end of the branch and 1 the child end.
class RegimeMarginals {
 public:
  RegimeMarginals(const TimedTree& tree, const TamObservation& obs, const MkRates& rates);

  auto p_extended(Node_index child, double fraction) const -> double;
  auto p_extended_at_node(Node_index node) const -> double;

 private:
  using Vec2 = std::array<double, 2>;
  TimedTree tree_;
  MkRates rates_;
  std::vector<Vec2> down_;       // subtree likelihood given state at node
  std::vector<Vec2> above_;      // outside data x state at the parent end of each branch

  auto transition(double t) const -> std::array<Vec2, 2>;
};

auto marginal_regime_probability(const TimedTree& tree, const TamObservation& obs, const MkRates& rates,
                                 Node_index child, double fraction) -> double;

struct RegimeSegment {
  double length;
  Regime regime;
};

// Tree whose branches are divided into regime segments, ordered from the
// parent end to the child end.  Segment lengths are positive and sum to the
// branch length; consecutive segments differ in regime.
class PaintedTree {
 public:
  PaintedTree() = default;
  PaintedTree(TimedTree tree, std::vector<std::vector<RegimeSegment>> segments);

  static auto uniform(TimedTree tree, Regime regime) -> PaintedTree;

  auto tree() const -> const TimedTree& { return tree_; }
  auto segments(Node_index child) const -> const std::vector<RegimeSegment>& { return segments_.at(child); }
  auto all_segments() const -> const std::vector<std::vector<RegimeSegment>>& { return segments_; }
  auto regime_length(Regime r) const -> double;
  // Regime at the child end of the branch above `node` (N for the root).
  auto regime_at(Node_index node) const -> Regime;

 private:
  TimedTree tree_;
  std::vector<std::vector<RegimeSegment>> segments_;
};

struct PaintOptions {
  int grid_points_per_branch = 100;
  double threshold = 0.5;
  // Once a lineage turns E it stays E in all descendants.
  bool sticky_e = false;
};

// Deterministic painting by thresholding the marginal P(E) on a per-branch
// grid; switch points are placed by linear interpolation between the
// midpoints of the two intervals on either side of the crossing.
auto paint_regimes(const TimedTree& tree, const MkRates& rates, const TamObservation& obs,
                   const PaintOptions& options = {}) -> PaintedTree;

// Extended Newick: each non-root branch carries `[&regime=N:0.12,E:0.31]`,
// segments listed from the parent end.
auto write_painted_newick(const PaintedTree& painted) -> std::string;
auto parse_painted_newick(std::string_view text) -> PaintedTree;
// One painted tree per line.
auto read_painted_trees(const std::string& path) -> std::vector<PaintedTree>;
auto write_painted_trees(const std::string& path, const std::vector<PaintedTree>& trees) -> void;

// Sorted tip labels below a node joined with '|'; stable names for internal nodes.
auto clade_name(const TimedTree& tree, Node_index node) -> std::string;

}  // namespace stemalt
