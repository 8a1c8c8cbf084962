#include "stemalt/model.h"

#include <cmath>
#include <numbers>

namespace stemalt {

namespace {

constexpr double k_log_sqrt_2pi = 0.91893853320467274178;

auto normal_log_density(double x, double mean, double sd) -> double {
  auto z = (x - mean) / sd;
  return -k_log_sqrt_2pi - std::log(sd) - 0.5 * z * z;
}

}  // namespace

auto model_kind_name(ModelKind kind) -> std::string_view {
  switch (kind) {
    case ModelKind::flat: return "flat";
    case ModelKind::hierarchical: return "hierarchical";
    case ModelKind::ancestry_constrained: return "ancestry_constrained";
  }
  return "?";
}

auto parse_model_kind(std::string_view text) -> ModelKind {
  if (text == "flat") return ModelKind::flat;
  if (text == "hierarchical" || text == "hier") return ModelKind::hierarchical;
  if (text == "ancestry_constrained" || text == "constrained") return ModelKind::ancestry_constrained;
  throw Error{"unknown model kind '" + std::string{text} + "'"};
}

auto ModelParams::zeros(ModelKind kind, int num_verbs) -> ModelParams {
  auto p = ModelParams{};
  p.kind = kind;
  if (has_verb_rates(kind)) p.log_rho.assign(num_verbs, RegimeRates{});
  return p;
}

auto parameter_count(ModelKind kind, int num_verbs) -> int {
  auto n = 1 + k_num_regimes * k_num_transitions;
  if (has_verb_rates(kind)) n += k_num_regimes * k_num_transitions * (1 + num_verbs);
  return n;
}

auto ModelParams::to_vector() const -> std::vector<double> {
  auto out = std::vector<double>{};
  out.reserve(parameter_count(kind, num_verbs()));
  out.push_back(log_delta);
  for (const auto& r : mu) out.insert(out.end(), r.begin(), r.end());
  if (has_verb_rates(kind)) {
    for (const auto& r : log_sigma) out.insert(out.end(), r.begin(), r.end());
    for (const auto& verb : log_rho) {
      for (const auto& r : verb) out.insert(out.end(), r.begin(), r.end());
    }
  }
  return out;
}

auto ModelParams::from_vector(ModelKind kind, int num_verbs, std::span<const double> values) -> ModelParams {
  if (std::ssize(values) != parameter_count(kind, num_verbs)) throw Error{"parameter vector has wrong length"};
  auto p = ModelParams::zeros(kind, num_verbs);
  auto it = values.begin();
  p.log_delta = *it++;
  auto read = [&](LivingRates& r) {
    for (auto& x : r) x = *it++;
  };
  for (auto& r : p.mu) read(r);
  if (has_verb_rates(kind)) {
    for (auto& r : p.log_sigma) read(r);
    for (auto& verb : p.log_rho) {
      for (auto& r : verb) read(r);
    }
  }
  return p;
}

auto parameter_names(ModelKind kind, const std::vector<std::string>& verbs) -> std::vector<std::string> {
  auto names = std::vector<std::string>{"log_delta"};
  auto block = [&](const std::string& prefix) {
    for (auto r = 0; r != k_num_regimes; ++r) {
      for (auto t = 0; t != k_num_transitions; ++t) {
        names.push_back(prefix + "[" + std::string{regime_name(static_cast<Regime>(r))} + "][" + transition_name(t) +
                        "]");
      }
    }
  };
  block("mu");
  if (has_verb_rates(kind)) {
    block("log_sigma");
    for (const auto& v : verbs) block("log_rho[" + v + "]");
  }
  return names;
}

auto prior_terms(const ModelParams& params) -> PriorTerms {
  auto terms = PriorTerms{};
  // delta ~ LogNormal(0, 1) on delta = exp(log_delta).
  terms.delta = normal_log_density(params.log_delta, 0.0, 1.0) - params.log_delta;
  terms.jacobian += params.log_delta;
  for (auto r = 0; r != k_num_regimes; ++r) {
    for (auto t = 0; t != k_num_transitions; ++t) terms.mu += normal_log_density(params.mu[r][t], 0.0, 1.0);
  }
  if (!has_verb_rates(params.kind)) return terms;

  for (auto r = 0; r != k_num_regimes; ++r) {
    for (auto t = 0; t != k_num_transitions; ++t) {
      auto log_sigma = params.log_sigma[r][t];
      auto sigma = std::exp(log_sigma);
      // HalfNormal(1) density is twice the standard normal density on sigma > 0.
      terms.sigma += std::numbers::ln2 + normal_log_density(sigma, 0.0, 1.0);
      terms.jacobian += log_sigma;
      for (const auto& verb : params.log_rho) {
        auto log_rho = verb[r][t];
        terms.verb_rates += normal_log_density(log_rho, params.mu[r][t], sigma) - log_rho;
        terms.jacobian += log_rho;
      }
    }
  }
  return terms;
}

auto log_prior(const ModelParams& params) -> double { return prior_terms(params).total(); }

namespace {

auto exp_rates(const LivingRates& log_rates) -> LivingRates {
  auto rates = LivingRates{};
  for (auto t = 0; t != k_num_transitions; ++t) rates[t] = std::exp(log_rates[t]);
  return rates;
}

}  // namespace

auto verb_rate_matrix(const ModelParams& params, int verb, Regime regime) -> RateMatrix {
  auto r = static_cast<int>(regime);
  const auto& log_rates = has_verb_rates(params.kind) ? params.log_rho.at(verb)[r] : params.mu[r];
  return RateMatrix::build(exp_rates(log_rates), std::exp(params.log_delta));
}

auto expected_rate_matrix(const ModelParams& params, Regime regime) -> RateMatrix {
  return RateMatrix::build(exp_rates(params.mu[static_cast<int>(regime)]), std::exp(params.log_delta));
}

PosteriorModel::PosteriorModel(ModelKind kind, CharacterMatrix data, PaintedTree painted, RootPrior root_prior)
    : kind_{kind},
      data_{std::move(data)},
      painted_{std::move(painted)},
      root_prior_{root_prior_vector(root_prior)},
      plan_{painted_, data_.taxa()},
      tips_{verb_tip_vectors(plan_, data_)} {
  if (plan_.num_tip_slots() != data_.num_taxa()) {
    for (const auto& taxon : data_.taxa()) {
      if (!painted_.tree().find_tip(taxon)) throw Error{"character data taxon '" + taxon + "' is not in the tree"};
    }
  }
}

auto PosteriorModel::verb_log_likelihood(const ModelParams& params, int verb) const -> double {
  auto q_e = verb_rate_matrix(params, verb, Regime::E);
  auto q_n = verb_rate_matrix(params, verb, Regime::N);
  auto by_regime = std::array<const RateMatrix*, 2>{};
  by_regime[static_cast<int>(Regime::E)] = &q_e;
  by_regime[static_cast<int>(Regime::N)] = &q_n;
  auto matrices = SegmentMatrices{};
  fill_segment_matrices(plan_, by_regime, matrices);
  return plan_log_likelihood(plan_, matrices, tips_[verb], root_prior_);
}

auto PosteriorModel::pointwise_loglik(const ModelParams& params) const -> std::vector<double> {
  if (has_verb_rates(params.kind) && params.num_verbs() != num_verbs()) {
    throw Error{"parameter set has " + std::to_string(params.num_verbs()) + " verbs, data has " +
                std::to_string(num_verbs())};
  }
  auto result = std::vector<double>(num_verbs());
  if (!has_verb_rates(params.kind)) {
    // Shared rates: one set of segment matrices serves every verb.
    auto q_e = expected_rate_matrix(params, Regime::E);
    auto q_n = expected_rate_matrix(params, Regime::N);
    auto by_regime = std::array<const RateMatrix*, 2>{};
    by_regime[static_cast<int>(Regime::E)] = &q_e;
    by_regime[static_cast<int>(Regime::N)] = &q_n;
    auto matrices = SegmentMatrices{};
    fill_segment_matrices(plan_, by_regime, matrices);
    for (auto v = 0; v != num_verbs(); ++v) result[v] = plan_log_likelihood(plan_, matrices, tips_[v], root_prior_);
    return result;
  }
  for (auto v = 0; v != num_verbs(); ++v) result[v] = verb_log_likelihood(params, v);
  return result;
}

auto PosteriorModel::log_posterior(const ModelParams& params) const -> double {
  if (has_verb_rates(params.kind) && params.num_verbs() != num_verbs()) {
    throw Error{"parameter set has " + std::to_string(params.num_verbs()) + " verbs, data has " +
                std::to_string(num_verbs())};
  }
  auto total = log_prior(params);
  try {
    for (auto ll : pointwise_loglik(params)) total += ll;
  } catch (const Error&) {
    // Rates too extreme to exponentiate: treated as a rejected point.
    return -INFINITY;
  }
  return std::isnan(total) ? -INFINITY : total;
}

auto pointwise_loglik(const ModelParams& params, const CharacterMatrix& data, const PaintedTree& painted,
                      RootPrior root_prior) -> std::vector<double> {
  return PosteriorModel{params.kind, data, painted, root_prior}.pointwise_loglik(params);
}

auto log_posterior(const ModelParams& params, const CharacterMatrix& data, const PaintedTree& painted,
                   RootPrior root_prior) -> double {
  return PosteriorModel{params.kind, data, painted, root_prior}.log_posterior(params);
}

auto constrain_root(const PaintedTree& painted, const CharacterMatrix& data, const RootStates& roots,
                    double relative_epsilon) -> ConstrainedProblem {
  if (!(relative_epsilon > 0.0)) throw Error{"constrain_root: epsilon must be > 0"};
  const auto& tree = painted.tree();
  auto epsilon = relative_epsilon * tree.height();
  auto nodes = tree.nodes();
  auto anchor = static_cast<Node_index>(nodes.size());
  auto node = Node{};
  node.label = std::string{k_root_anchor_taxon};
  node.parent = tree.root();
  node.length = epsilon;
  nodes.push_back(node);
  nodes[tree.root()].children.push_back(anchor);

  auto segments = painted.all_segments();
  segments.push_back({{epsilon, Regime::N}});

  auto states = std::vector<int>{};
  for (const auto& verb : data.verbs()) states.push_back(roots.state_of(verb));
  return {PaintedTree{TimedTree{std::move(nodes), tree.root()}, std::move(segments)},
          data.with_column(std::string{k_root_anchor_taxon}, std::move(states))};
}

}  // namespace stemalt
