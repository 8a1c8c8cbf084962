#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stemalt/character_matrix.h"
#include "stemalt/ctmc.h"
#include "stemalt/likelihood.h"
#include "stemalt/regime.h"

namespace stemalt {

enum class ModelKind { flat, hierarchical, ancestry_constrained };

auto model_kind_name(ModelKind kind) -> std::string_view;
auto parse_model_kind(std::string_view text) -> ModelKind;
inline auto has_verb_rates(ModelKind kind) -> bool { return kind != ModelKind::flat; }

using RegimeRates = std::array<LivingRates, k_num_regimes>;

// Model parameters on the unconstrained (log) scale.
//
//   delta ~ LogNormal(0, 1)                  global death rate
//   mu[r][t] ~ Normal(0, 1)                  per regime and living transition
//   sigma[r][t] ~ HalfNormal(1)              hierarchical only
//   rho[v][r][t] ~ LogNormal(mu, sigma)      hierarchical only, per verb
//
// The flat model has 41 parameters (log_delta and the 2 x 20 mu); verbs share
// the rates exp(mu).  The hierarchical model adds 40 log-scales and V x 40
// verb log-rates.
struct ModelParams {
  ModelKind kind = ModelKind::flat;
  double log_delta = 0.0;
  RegimeRates mu{};
  RegimeRates log_sigma{};
  std::vector<RegimeRates> log_rho;

  static auto zeros(ModelKind kind, int num_verbs) -> ModelParams;

  auto num_verbs() const -> int { return static_cast<int>(log_rho.size()); }
  auto to_vector() const -> std::vector<double>;
  static auto from_vector(ModelKind kind, int num_verbs, std::span<const double> values) -> ModelParams;
};

auto parameter_count(ModelKind kind, int num_verbs) -> int;
// Column names matching ModelParams::to_vector(), e.g. "mu[E][ABB->AAA]".
auto parameter_names(ModelKind kind, const std::vector<std::string>& verbs) -> std::vector<std::string>;

// Prior log-density split by component.  Density terms are on the natural
// scale; `jacobian` collects the log-Jacobians of the log transforms so that
// total() is the density of the unconstrained parameter vector.
struct PriorTerms {
  double mu = 0.0;
  double sigma = 0.0;
  double delta = 0.0;
  double verb_rates = 0.0;
  double jacobian = 0.0;

  auto total() const -> double { return mu + sigma + delta + verb_rates + jacobian; }
};

auto prior_terms(const ModelParams& params) -> PriorTerms;
auto log_prior(const ModelParams& params) -> double;

// Rate matrix for one verb in one regime (exp(mu) for the flat model).
auto verb_rate_matrix(const ModelParams& params, int verb, Regime regime) -> RateMatrix;
// Matrix of expected rates exp(mu) with death exp(log_delta).
auto expected_rate_matrix(const ModelParams& params, Regime regime) -> RateMatrix;

// Evaluation context for one data set on one painted tree.
class PosteriorModel {
 public:
  PosteriorModel(ModelKind kind, CharacterMatrix data, PaintedTree painted, RootPrior root_prior);

  auto kind() const -> ModelKind { return kind_; }
  auto data() const -> const CharacterMatrix& { return data_; }
  auto painted() const -> const PaintedTree& { return painted_; }
  auto plan() const -> const PruningPlan& { return plan_; }
  auto root_prior() const -> const Vector6& { return root_prior_; }
  auto tips(int verb) const -> std::span<const Vector6> { return tips_[verb]; }
  auto num_verbs() const -> int { return data_.num_verbs(); }

  auto verb_log_likelihood(const ModelParams& params, int verb) const -> double;
  auto pointwise_loglik(const ModelParams& params) const -> std::vector<double>;
  // log_prior + sum of pointwise log-likelihoods; -inf for impossible data.
  auto log_posterior(const ModelParams& params) const -> double;

 private:
  ModelKind kind_;
  CharacterMatrix data_;
  PaintedTree painted_;
  Vector6 root_prior_;
  PruningPlan plan_;
  std::vector<std::vector<Vector6>> tips_;
};

auto pointwise_loglik(const ModelParams& params, const CharacterMatrix& data, const PaintedTree& painted,
                      RootPrior root_prior = RootPrior::uniform_all) -> std::vector<double>;
auto log_posterior(const ModelParams& params, const CharacterMatrix& data, const PaintedTree& painted,
                   RootPrior root_prior = RootPrior::uniform_all) -> double;

inline constexpr std::string_view k_root_anchor_taxon = "__root_anchor__";

// Data and tree for the ancestry-constrained model: a short pseudo-branch in
// regime N hangs off the root and its tip is observed in each verb's expert
// root state.
struct ConstrainedProblem {
  PaintedTree painted;
  CharacterMatrix data;
};

// The anchor branch has length relative_epsilon * tree height.  Throws Error
// if a verb has no root state.
auto constrain_root(const PaintedTree& painted, const CharacterMatrix& data, const RootStates& roots,
                    double relative_epsilon = 1e-6) -> ConstrainedProblem;

}  // namespace stemalt
