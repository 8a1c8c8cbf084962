#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stemalt/model.h"

namespace stemalt {

struct DrawProvenance {
  int tree = 0;
  int chain = 0;
  int iteration = 0;
};

// One retained draw, as handed to a streaming sink.
struct DrawRecord {
  DrawProvenance provenance;
  double log_posterior;
  const std::vector<double>* params;
  const std::vector<double>* pointwise;
};

struct SamplerConfig {
  int iterations = 4000;
  int warmup = 2000;  // discarded
  int chains = 4;
  std::uint64_t seed = 1;
  // Acceptance rate that per-block proposal scales are tuned to during warmup.
  double target_acceptance = 0.3;
  int threads = 1;
  double rhat_threshold = 1.05;
  // Called for every retained draw in (tree, chain, iteration) order after
  // all chains finish.
  std::function<void(const DrawRecord&)> sink;

  auto validate() const -> void;
};

// Retained draws pooled over chains and trees with equal weight per tree.
struct PosteriorPool {
  ModelKind kind = ModelKind::flat;
  std::vector<std::string> verbs;
  std::vector<std::string> param_names;
  Eigen::MatrixXd draws;      // rows = draws, columns = parameters (unconstrained scale)
  Eigen::MatrixXd pointwise;  // rows = draws, columns = verbs
  std::vector<double> log_posterior;
  std::vector<DrawProvenance> provenance;
  int num_trees = 0;
  int chains = 0;
  std::vector<double> rhat;   // per parameter, worst tree
  std::vector<std::string> warnings;

  auto num_draws() const -> int { return static_cast<int>(draws.rows()); }
  auto params(int draw) const -> ModelParams;
  auto column(const std::string& name) const -> int;  // throws if absent
};

// Unconstrained parameters drawn from Uniform(-2, 2), redrawn until the log
// posterior is finite.  Throws Error after 100 failed attempts.
auto initialize(const PosteriorModel& model, std::mt19937_64& rng) -> ModelParams;

// Runs cfg.chains chains per model (one model per painted tree) with adaptive
// Metropolis-within-Gibbs.  Hierarchical moves: per-verb 4-rate blocks, exact
// Gibbs draws of mu, random-walk log-sigma updates, joint shift and scale moves
// of (mu, sigma, verb rates), and log-delta updates.  Flat moves: 4-rate blocks
// of mu and log-delta.
auto sample(const std::vector<PosteriorModel>& models, const SamplerConfig& cfg) -> PosteriorPool;

auto sample(ModelKind kind, const CharacterMatrix& data, const std::vector<PaintedTree>& painted_trees,
            const SamplerConfig& cfg, RootPrior root_prior = RootPrior::uniform_all) -> PosteriorPool;

// Robbins-Monro tuning of a log proposal scale toward a target acceptance rate.
class AdaptiveScale {
 public:
  explicit AdaptiveScale(double initial = 0.5) : log_scale_{std::log(initial)} {}
  auto scale() const -> double { return std::exp(log_scale_); }
  auto update(bool accepted, double target) -> void;
  auto acceptance_rate() const -> double { return proposals_ ? double(accepted_) / proposals_ : 0.0; }
  auto reset_counts() -> void { proposals_ = accepted_ = 0; }

 private:
  double log_scale_;
  long adapt_steps_ = 0;
  long proposals_ = 0;
  long accepted_ = 0;
};

// Generic adaptive random-walk Metropolis on an arbitrary log density, built
// on the same proposal machinery as the model sampler.  Returns retained draws
// (rows) for one chain.
auto random_walk_metropolis(const std::function<double(const Eigen::VectorXd&)>& log_density,
                            const Eigen::VectorXd& init, int iterations, int warmup, double target_acceptance,
                            std::mt19937_64& rng) -> Eigen::MatrixXd;

// Per-chain RNG stream derived from (seed, tree, chain).
auto chain_rng(std::uint64_t seed, int tree, int chain) -> std::mt19937_64;

}  // namespace stemalt
