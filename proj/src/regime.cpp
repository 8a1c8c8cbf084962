#include "stemalt/regime.h"

#include <algorithm>
#include <cmath>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "stemalt/csv.h"

namespace stemalt {

auto regime_name(Regime r) -> std::string_view { return r == Regime::E ? "E" : "N"; }

auto parse_regime(std::string_view text) -> Regime {
  if (text == "E") return Regime::E;
  if (text == "N") return Regime::N;
  throw Error{"unknown regime '" + std::string{text} + "' (expected E or N)"};
}

auto read_tam_csv(const std::string& path) -> TamObservation {
  auto rows = read_csv(path);
  auto obs = TamObservation{};
  for (auto k = 0u; k != rows.size(); ++k) {
    const auto& row = rows[k];
    if (row.size() != 2) throw Error{path + ": expected two columns `taxon,state`"};
    if (k == 0 && row[0] == "taxon") continue;
    if (!obs.by_taxon.emplace(row[0], parse_regime(row[1])).second) {
      throw Error{path + ": duplicate taxon '" + row[0] + "'"};
    }
  }
  return obs;
}

auto check_tam_coverage(const TimedTree& tree, const TamObservation& obs) -> void {
  for (const auto& label : tree.tip_labels()) {
    if (!obs.by_taxon.contains(label)) throw Error{"TAM data has no value for taxon '" + label + "'"};
  }
  for (const auto& [label, regime] : obs.by_taxon) {
    if (!tree.find_tip(label)) throw Error{"TAM data names taxon '" + label + "' which is not in the tree"};
  }
}

namespace {

using Vec2 = std::array<double, 2>;
using Mat2 = std::array<Vec2, 2>;

// Closed-form 2-state transition matrix; index 0 = N, 1 = E.
auto mk_transition(double n_to_e, double e_to_n, double t) -> Mat2 {
  auto total = n_to_e + e_to_n;
  if (total <= 0.0 || t == 0.0) return {Vec2{1.0, 0.0}, Vec2{0.0, 1.0}};
  auto decay = std::exp(-total * t);
  auto pi_n = e_to_n / total;
  auto pi_e = n_to_e / total;
  return {Vec2{pi_n + pi_e * decay, pi_e * (1.0 - decay)}, Vec2{pi_n * (1.0 - decay), pi_e + pi_n * decay}};
}

auto mat_vec(const Mat2& p, const Vec2& v) -> Vec2 {
  return {p[0][0] * v[0] + p[0][1] * v[1], p[1][0] * v[0] + p[1][1] * v[1]};
}

auto apply_transposed(const Mat2& p, const Vec2& v) -> Vec2 {
  return {p[0][0] * v[0] + p[1][0] * v[1], p[0][1] * v[0] + p[1][1] * v[1]};
}

auto tip_vector(const TimedTree& tree, const TamObservation& obs, Node_index tip) -> Vec2 {
  auto it = obs.by_taxon.find(tree.at(tip).label);
  if (it == obs.by_taxon.end()) throw Error{"TAM data has no value for taxon '" + tree.at(tip).label + "'"};
  return it->second == Regime::E ? Vec2{0.0, 1.0} : Vec2{1.0, 0.0};
}

// Post-order partial likelihoods with per-node rescaling; returns the
// accumulated log scale.
auto prune_binary(const TimedTree& tree, const TamObservation& obs, double n_to_e, double e_to_n,
                  std::vector<Vec2>& down) -> double {
  down.assign(tree.size(), Vec2{1.0, 1.0});
  auto log_scale = 0.0;
  for (auto n : tree.postorder()) {
    if (tree.is_tip(n)) {
      down[n] = tip_vector(tree, obs, n);
      continue;
    }
    auto v = Vec2{1.0, 1.0};
    for (auto c : tree.at(n).children) {
      auto b = mat_vec(mk_transition(n_to_e, e_to_n, tree.at(c).length), down[c]);
      v[0] *= b[0];
      v[1] *= b[1];
    }
    auto m = std::max(v[0], v[1]);
    if (m > 0.0 && n != tree.root()) {
      v[0] /= m;
      v[1] /= m;
      log_scale += std::log(m);
    }
    down[n] = v;
  }
  return log_scale;
}

}  // namespace

auto binary_mk_log_likelihood(const TimedTree& tree, const TamObservation& obs, double n_to_e, double e_to_n)
    -> double {
  auto down = std::vector<Vec2>{};
  auto log_scale = prune_binary(tree, obs, n_to_e, e_to_n, down);
  return std::log(down[tree.root()][0]) + log_scale;
}

namespace {

struct MkObjective {
  const TimedTree* tree;
  const TamObservation* obs;
};

auto clamp_log_rate(double x) -> double {
  return std::clamp(x, std::log(k_mk_rate_floor), std::log(k_mk_rate_ceiling));
}

auto mk_negative_log_likelihood(const gsl_vector* x, void* params) -> double {
  const auto& objective = *static_cast<const MkObjective*>(params);
  auto la = clamp_log_rate(gsl_vector_get(x, 0));
  auto lb = clamp_log_rate(gsl_vector_get(x, 1));
  auto ll = binary_mk_log_likelihood(*objective.tree, *objective.obs, std::exp(la), std::exp(lb));
  if (!std::isfinite(ll)) return 1e300;
  // Past the bounds the surface is flat; a quadratic wall lets the simplex
  // contract onto a boundary optimum.
  auto da = gsl_vector_get(x, 0) - la;
  auto db = gsl_vector_get(x, 1) - lb;
  return -ll + da * da + db * db;
}

auto nelder_mead(MkObjective& objective, std::array<double, 2> start, std::array<double, 2>& best) -> bool {
  auto fn = gsl_multimin_function{&mk_negative_log_likelihood, 2, &objective};
  auto* x = gsl_vector_alloc(2);
  auto* step = gsl_vector_alloc(2);
  gsl_vector_set(x, 0, start[0]);
  gsl_vector_set(x, 1, start[1]);
  gsl_vector_set_all(step, 1.0);
  auto* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2);
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  auto converged = false;
  auto last_fval = s->fval;
  auto stalled = 0;
  for (auto iter = 0; iter != 5000; ++iter) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-9) == GSL_SUCCESS) {
      converged = true;
      break;
    }
    // A direction the data do not inform leaves the simplex wide but the
    // objective fixed.
    stalled = last_fval - s->fval > 1e-12 ? 0 : stalled + 1;
    last_fval = std::min(last_fval, s->fval);
    if (stalled == 300) {
      converged = true;
      break;
    }
  }
  best = {clamp_log_rate(gsl_vector_get(s->x, 0)), clamp_log_rate(gsl_vector_get(s->x, 1))};
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);
  return converged;
}

}  // namespace

auto fit_binary_mk(const TimedTree& tree, const TamObservation& obs) -> MkRates {
  check_tam_coverage(tree, obs);
  auto objective = MkObjective{&tree, &obs};
  auto guess = std::log(1.0 / std::max(tree.total_length(), 1e-12));
  auto best = std::array<double, 2>{};
  // Restarting from the first optimum guards against a collapsed simplex.
  auto first = nelder_mead(objective, {guess, guess}, best);
  auto second = nelder_mead(objective, best, best);
  if (!first && !second) throw Error{"fit_binary_mk: optimizer did not converge"};
  auto result = MkRates{std::exp(best[0]), std::exp(best[1]), 0.0};
  result.log_likelihood = binary_mk_log_likelihood(tree, obs, result.n_to_e, result.e_to_n);
  return result;
}

RegimeMarginals::RegimeMarginals(const TimedTree& tree, const TamObservation& obs, const MkRates& rates)
    : tree_{tree}, rates_{rates} {
  prune_binary(tree_, obs, rates_.n_to_e, rates_.e_to_n, down_);
  above_.assign(tree_.size(), Vec2{0.0, 0.0});
  // outside[n]: P(data outside subtree n, state at n); root fixed at N.
  auto outside = std::vector<Vec2>(tree_.size(), Vec2{0.0, 0.0});
  outside[tree_.root()] = {1.0, 0.0};
  for (auto n : tree_.preorder()) {
    const auto& children = tree_.at(n).children;
    auto below = std::vector<Vec2>{};
    for (auto c : children) below.push_back(mat_vec(transition(tree_.at(c).length), down_[c]));
    for (auto k = 0u; k != children.size(); ++k) {
      auto a = outside[n];
      for (auto j = 0u; j != children.size(); ++j) {
        if (j == k) continue;
        a[0] *= below[j][0];
        a[1] *= below[j][1];
      }
      auto m = std::max(a[0], a[1]);
      if (m > 0.0) {
        a[0] /= m;
        a[1] /= m;
      }
      auto c = children[k];
      above_[c] = a;
      outside[c] = apply_transposed(transition(tree_.at(c).length), a);
    }
  }
}

auto RegimeMarginals::transition(double t) const -> std::array<Vec2, 2> {
  return mk_transition(rates_.n_to_e, rates_.e_to_n, t);
}

auto RegimeMarginals::p_extended(Node_index child, double fraction) const -> double {
  if (child == tree_.root()) return 0.0;
  fraction = std::clamp(fraction, 0.0, 1.0);
  auto length = tree_.at(child).length;
  auto x = fraction * length;
  auto a = apply_transposed(transition(x), above_[child]);
  auto b = mat_vec(transition(length - x), down_[child]);
  auto joint_n = a[0] * b[0];
  auto joint_e = a[1] * b[1];
  auto total = joint_n + joint_e;
  if (!(total > 0.0)) return 0.0;
  return joint_e / total;
}

auto RegimeMarginals::p_extended_at_node(Node_index node) const -> double {
  if (node == tree_.root()) return 0.0;
  return p_extended(node, 1.0);
}

auto marginal_regime_probability(const TimedTree& tree, const TamObservation& obs, const MkRates& rates,
                                 Node_index child, double fraction) -> double {
  return RegimeMarginals{tree, obs, rates}.p_extended(child, fraction);
}

PaintedTree::PaintedTree(TimedTree tree, std::vector<std::vector<RegimeSegment>> segments)
    : tree_{std::move(tree)}, segments_{std::move(segments)} {
  if (std::ssize(segments_) != tree_.size()) throw Error{"painted tree: one segment list per node required"};
  if (!segments_[tree_.root()].empty()) throw Error{"painted tree: the root carries no segments"};
  for (auto n = 0; n != tree_.size(); ++n) {
    if (n == tree_.root()) continue;
    auto sum = 0.0;
    const auto& segs = segments_[n];
    for (auto k = 0u; k != segs.size(); ++k) {
      if (!(segs[k].length > 0.0) || !std::isfinite(segs[k].length)) {
        throw Error{"painted tree: segment lengths must be positive"};
      }
      if (k > 0 && segs[k].regime == segs[k - 1].regime) {
        throw Error{"painted tree: consecutive segments must differ in regime"};
      }
      sum += segs[k].length;
    }
    auto length = tree_.at(n).length;
    if (std::abs(sum - length) > 1e-9 * std::max(1.0, length)) {
      throw Error{"painted tree: segments do not sum to the branch length"};
    }
  }
}

auto PaintedTree::uniform(TimedTree tree, Regime regime) -> PaintedTree {
  auto segments = std::vector<std::vector<RegimeSegment>>(tree.size());
  for (auto n = 0; n != tree.size(); ++n) {
    if (n != tree.root() && tree.at(n).length > 0.0) segments[n].push_back({tree.at(n).length, regime});
  }
  return PaintedTree{std::move(tree), std::move(segments)};
}

auto PaintedTree::regime_length(Regime r) const -> double {
  auto sum = 0.0;
  for (const auto& segs : segments_) {
    for (const auto& s : segs) {
      if (s.regime == r) sum += s.length;
    }
  }
  return sum;
}

auto PaintedTree::regime_at(Node_index node) const -> Regime {
  for (auto n = node; n != tree_.root(); n = tree_.at(n).parent) {
    if (!segments_[n].empty()) return segments_[n].back().regime;
  }
  return Regime::N;
}

namespace {

auto merge_into(std::vector<RegimeSegment>& segs, double length, Regime regime) -> void {
  if (!(length > 0.0)) return;
  if (!segs.empty() && segs.back().regime == regime) {
    segs.back().length += length;
  } else {
    segs.push_back({length, regime});
  }
}

}  // namespace

auto paint_regimes(const TimedTree& tree, const MkRates& rates, const TamObservation& obs,
                   const PaintOptions& options) -> PaintedTree {
  if (options.grid_points_per_branch < 2) throw Error{"paint_regimes: need at least 2 grid points per branch"};
  check_tam_coverage(tree, obs);
  auto marginals = RegimeMarginals{tree, obs, rates};
  auto segments = std::vector<std::vector<RegimeSegment>>(tree.size());
  auto ends_extended = std::vector<bool>(tree.size(), false);
  auto intervals = options.grid_points_per_branch - 1;

  for (auto n : tree.preorder()) {
    if (n == tree.root()) continue;
    auto length = tree.at(n).length;
    auto parent = tree.at(n).parent;
    if (options.sticky_e && ends_extended[parent]) {
      ends_extended[n] = true;
      merge_into(segments[n], length, Regime::E);
      continue;
    }
    if (length == 0.0) {
      ends_extended[n] = ends_extended[parent];
      continue;
    }

    auto mid = std::vector<double>(intervals);
    auto p = std::vector<double>(intervals);
    auto label = std::vector<bool>(intervals);
    for (auto i = 0; i != intervals; ++i) {
      mid[i] = (i + 0.5) / intervals;
      p[i] = marginals.p_extended(n, mid[i]);
      label[i] = p[i] > options.threshold;
    }
    if (options.sticky_e) {
      for (auto i = 1; i != intervals; ++i) label[i] = label[i] || label[i - 1];
    }

    // Switch points, as fractions along the branch.
    auto cut = 0.0;
    for (auto i = 1; i != intervals; ++i) {
      if (label[i] == label[i - 1]) continue;
      auto dp = p[i] - p[i - 1];
      auto w = dp != 0.0 ? std::clamp((options.threshold - p[i - 1]) / dp, 0.0, 1.0) : 0.5;
      auto at = mid[i - 1] + w * (mid[i] - mid[i - 1]);
      merge_into(segments[n], (at - cut) * length, label[i - 1] ? Regime::E : Regime::N);
      cut = at;
    }
    // The last piece absorbs rounding so segments sum exactly to the length.
    auto used = 0.0;
    for (const auto& s : segments[n]) used += s.length;
    merge_into(segments[n], length - used, label.back() ? Regime::E : Regime::N);
    ends_extended[n] = label.back();
  }
  return PaintedTree{tree, std::move(segments)};
}

auto clade_name(const TimedTree& tree, Node_index node) -> std::string {
  auto labels = std::vector<std::string>{};
  for (auto t : tree.tips()) {
    if (tree.is_ancestor(node, t)) labels.push_back(tree.at(t).label);
  }
  std::ranges::sort(labels);
  auto out = std::string{};
  for (const auto& l : labels) {
    if (!out.empty()) out += '|';
    out += l;
  }
  return out;
}

}  // namespace stemalt
