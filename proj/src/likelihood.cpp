#include "stemalt/likelihood.h"

#include <cmath>

namespace stemalt {

auto tip_vector(int cell) -> Vector6 {
  if (cell == k_missing) return Vector6::Ones();
  if (cell < 0 || cell >= k_num_states) throw Error{"tip_vector: invalid state index " + std::to_string(cell)};
  Vector6 v = Vector6::Zero();
  v(cell) = 1.0;
  return v;
}

auto tip_likelihoods(const CharacterMatrix& data, int verb) -> TipLikelihoods {
  auto tips = TipLikelihoods{};
  for (auto t = 0; t != data.num_taxa(); ++t) tips[data.taxa()[t]] = tip_vector(data.cell(verb, t));
  return tips;
}

auto root_prior_vector(RootPrior prior) -> Vector6 {
  if (prior == RootPrior::uniform_all) return Vector6::Constant(1.0 / k_num_states);
  Vector6 v = Vector6::Constant(1.0 / k_num_living);
  v(k_dead) = 0.0;
  return v;
}

PruningPlan::PruningPlan(const PaintedTree& painted, const std::vector<std::string>& taxa) {
  const auto& tree = painted.tree();
  step_of_node_.assign(tree.size(), -1);
  for (auto n : tree.postorder()) {
    auto step = Step{};
    step.node = n;
    step.first_child = static_cast<int>(child_list_.size());
    step.num_children = static_cast<int>(tree.at(n).children.size());
    for (auto c : tree.at(n).children) child_list_.push_back(step_of_node_[c]);
    step.first_segment = static_cast<int>(segments_.size());
    if (n != tree.root()) {
      for (const auto& s : painted.segments(n)) segments_.push_back({s.length, s.regime});
    }
    step.num_segments = static_cast<int>(segments_.size()) - step.first_segment;
    step.tip_slot = -1;
    if (tree.is_tip(n)) {
      const auto& label = tree.at(n).label;
      auto column = -1;
      for (auto k = 0u; k != taxa.size(); ++k) {
        if (taxa[k] == label) column = static_cast<int>(k);
      }
      if (column < 0) throw Error{"no character data column for taxon '" + label + "'"};
      step.tip_slot = num_slots_++;
      slot_column_.push_back(column);
    }
    step_of_node_[n] = static_cast<int>(steps_.size());
    steps_.push_back(step);
  }
}

auto fill_segment_matrices(const PruningPlan& plan, const std::array<const RateMatrix*, 2>& by_regime,
                           SegmentMatrices& out, unsigned regime_mask) -> void {
  out.resize(plan.num_segments());
  const auto& segments = plan.segments();
  for (auto k = 0; k != plan.num_segments(); ++k) {
    auto r = static_cast<int>(segments[k].regime);
    if (!(regime_mask & (1u << r))) continue;
    out[k] = transition_probabilities(*by_regime[r], segments[k].length);
  }
}

namespace {

// Post-order sweep; `partials` has one entry per step.
auto sweep(const PruningPlan& plan, const SegmentMatrices& matrices, std::span<const Vector6> tips,
           std::vector<Vector6>& partials, std::vector<Vector6>& branch_tops) -> double {
  const auto& steps = plan.steps();
  partials.resize(steps.size());
  branch_tops.resize(steps.size());
  auto log_scale = 0.0;
  for (auto k = 0u; k != steps.size(); ++k) {
    const auto& step = steps[k];
    Vector6 v;
    if (step.tip_slot >= 0) {
      v = tips[step.tip_slot];
    } else {
      v.setOnes();
      for (auto c : plan.child_steps(step)) v = v.cwiseProduct(branch_tops[c]);
      auto m = v.maxCoeff();
      if (m > 0.0) {
        v /= m;
        log_scale += std::log(m);
      }
    }
    partials[k] = v;
    // Child-upward: apply the tipward segment first.
    for (auto s = step.first_segment + step.num_segments - 1; s >= step.first_segment; --s) v = matrices[s] * v;
    branch_tops[k] = v;
  }
  return log_scale;
}

}  // namespace

auto plan_root_partials(const PruningPlan& plan, const SegmentMatrices& matrices, std::span<const Vector6> tips,
                        double& log_scale) -> Vector6 {
  thread_local std::vector<Vector6> partials;
  thread_local std::vector<Vector6> tops;
  log_scale = sweep(plan, matrices, tips, partials, tops);
  return partials.back();
}

auto plan_log_likelihood(const PruningPlan& plan, const SegmentMatrices& matrices, std::span<const Vector6> tips,
                         const Vector6& root_prior) -> double {
  auto log_scale = 0.0;
  auto root = plan_root_partials(plan, matrices, tips, log_scale);
  return std::log(root_prior.dot(root)) + log_scale;
}

auto verb_tip_vectors(const PruningPlan& plan, const CharacterMatrix& data) -> std::vector<std::vector<Vector6>> {
  auto result = std::vector<std::vector<Vector6>>(data.num_verbs());
  for (auto v = 0; v != data.num_verbs(); ++v) {
    for (auto column : plan.slot_column()) result[v].push_back(tip_vector(data.cell(v, column)));
  }
  return result;
}

auto prune_verb(const PaintedTree& painted, const RateMatrix& q_e, const RateMatrix& q_n, const TipLikelihoods& tips,
                const Vector6& root_prior) -> double {
  auto taxa = std::vector<std::string>{};
  auto vectors = std::vector<Vector6>{};
  for (const auto& [taxon, v] : tips) {
    taxa.push_back(taxon);
    vectors.push_back(v);
  }
  auto plan = PruningPlan{painted, taxa};
  if (plan.num_tip_slots() != static_cast<int>(tips.size())) {
    throw Error{"prune_verb: tip likelihoods name taxa that are not in the tree"};
  }
  auto slots = std::vector<Vector6>{};
  for (auto column : plan.slot_column()) slots.push_back(vectors[column]);
  auto by_regime = std::array<const RateMatrix*, 2>{};
  by_regime[static_cast<int>(Regime::E)] = &q_e;
  by_regime[static_cast<int>(Regime::N)] = &q_n;
  auto matrices = SegmentMatrices{};
  fill_segment_matrices(plan, by_regime, matrices);
  auto ll = plan_log_likelihood(plan, matrices, slots, root_prior);
  if (!std::isfinite(ll)) throw Error{"prune_verb: non-finite log-likelihood"};
  return ll;
}

}  // namespace stemalt
