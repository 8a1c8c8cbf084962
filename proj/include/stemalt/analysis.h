#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stemalt/ctmc.h"
#include "stemalt/mcmc.h"

namespace stemalt {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  auto contains(double x) const -> bool { return lo <= x && x <= hi; }
  auto excludes_zero() const -> bool { return !contains(0.0); }
};

inline constexpr int k_min_hdi_samples = 10;

// Shortest window of the sorted samples holding ceil(mass * n) of them; ties
// go to the lowest start.  Throws Error with fewer than 10 samples.
auto hdi(std::span<const double> samples, double mass) -> Interval;

enum class RateQuantity { stationary = 0, entry = 1, exit = 2 };
inline constexpr int k_num_quantities = 3;
auto quantity_name(RateQuantity q) -> std::string_view;

// Differences E minus N of stationary probability, entry rate and exit rate
// per living state, computed from the expected rate matrices exp(mu).
struct RegimeDiffSummary {
  double mass = 0.95;
  // samples[q][state][draw]
  std::array<std::array<std::vector<double>, k_num_living>, k_num_quantities> samples;
  std::array<std::array<Interval, k_num_living>, k_num_quantities> intervals;
  int used_draws = 0;
  int excluded_draws = 0;  // draws with a reducible expected matrix
  // With fewer than k_min_hdi_samples usable draws the intervals span the
  // whole real line.

  auto interval(RateQuantity q, int state) const -> const Interval& {
    return intervals[static_cast<int>(q)][state];
  }
  auto decisive(RateQuantity q, int state) const -> bool { return interval(q, state).excludes_zero(); }
  auto interval_at(RateQuantity q, int state, double other_mass) const -> Interval;
};

// One pair of (N, E) matrices per draw.
auto regime_differences(const std::vector<std::array<RateMatrix, 2>>& draws, double mass = 0.95)
    -> RegimeDiffSummary;
auto regime_differences(const PosteriorPool& pool, double mass = 0.95) -> RegimeDiffSummary;

struct RootReconstruction {
  std::string verb;
  Vector6 frequencies = Vector6::Zero();  // of the state sampled per draw
  Vector6 mean_probabilities = Vector6::Zero();
  int modal = 0;
  bool tie = false;
};

// Root-state posterior for one verb: per retained draw, the root distribution
// prior(s) * L(s) is normalized and one state is sampled from it.  `models`
// holds one entry per tree of the pool; each draw is evaluated on the tree it
// came from.
auto reconstruct_root(const PosteriorPool& pool, const std::vector<PosteriorModel>& models, int verb,
                      std::uint64_t seed) -> RootReconstruction;
auto reconstruct_all(const PosteriorPool& pool, const std::vector<PosteriorModel>& models, std::uint64_t seed)
    -> std::vector<RootReconstruction>;

struct LooResult {
  double elpd = 0.0;
  double se = 0.0;
  std::vector<double> pointwise;
  std::vector<double> pareto_k;  // -inf where smoothing was skipped
  std::vector<std::string> warnings;
};

// Pareto-smoothed importance-sampling leave-one-out over a draws x
// observations log-likelihood matrix.  With `smooth` false the raw ratios are
// used.
auto psis_loo(const Eigen::MatrixXd& loglik, bool smooth = true) -> LooResult;

struct LooComparison {
  double delta = 0.0;  // a minus b
  double se = 0.0;
};

auto compare(const LooResult& a, const LooResult& b) -> LooComparison;

// Generalized Pareto fit of exceedances (sorted ascending, all > 0) by the
// Zhang-Stephens posterior-mean estimator with the usual weak prior on k.
struct GpdFit {
  double k = 0.0;
  double sigma = 0.0;
};
auto fit_generalized_pareto(std::span<const double> exceedances) -> GpdFit;

// Smoothed log importance weights for one observation, with the shape
// estimate.  `log_ratios` are modified in place.
auto pareto_smooth(std::vector<double>& log_ratios) -> double;

}  // namespace stemalt
