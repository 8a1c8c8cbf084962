#include "stemalt/mcmc.h"

#include <algorithm>
#include <atomic>
#include <limits>
#include <cmath>
#include <mutex>
#include <thread>

#include <Eigen/Cholesky>

#include "stemalt/diagnostics.h"

namespace stemalt {

namespace {

constexpr double k_log_sqrt_2pi = 0.91893853320467274178;

auto normal_log_density(double x, double mean, double sd) -> double {
  auto z = (x - mean) / sd;
  return -k_log_sqrt_2pi - std::log(sd) - 0.5 * z * z;
}

// Unconstrained log-density of sigma = exp(log_sigma) under HalfNormal(1).
auto log_sigma_prior(double log_sigma) -> double {
  auto sigma = std::exp(log_sigma);
  return -0.5 * sigma * sigma + log_sigma;
}

constexpr int k_block = k_num_living - 1;  // transitions sharing a source state

auto block_transitions(int source) -> std::array<int, k_block> {
  auto out = std::array<int, k_block>{};
  for (auto k = 0; k != k_block; ++k) out[k] = source * k_block + k;
  return out;
}

auto accept(double log_ratio, std::mt19937_64& rng) -> bool {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  return std::log(std::uniform_real_distribution<double>{0.0, 1.0}(rng)) < log_ratio;
}

auto exp_rates(const LivingRates& log_rates) -> LivingRates {
  auto rates = LivingRates{};
  for (auto t = 0; t != k_num_transitions; ++t) rates[t] = std::exp(log_rates[t]);
  return rates;
}

// Per-coordinate proposal standard deviations, re-estimated from the draws of
// each warmup window and fixed after warmup.
class ProposalShape {
 public:
  ProposalShape() {
    sd_.fill(1.0);
    center_.fill(0.0);
  }

  auto sd(int r, int t) const -> double { return sd_[index(r, t)]; }
  // Window mean at the last successful refresh.
  auto center(int r, int t) const -> double { return center_[index(r, t)]; }

  auto observe(const RegimeRates& x) -> void {
    ++n_;
    for (auto r = 0; r != k_num_regimes; ++r) {
      for (auto t = 0; t != k_num_transitions; ++t) {
        auto i = index(r, t);
        auto d = x[r][t] - mean_[i];
        mean_[i] += d / static_cast<double>(n_);
        m2_[i] += d * (x[r][t] - mean_[i]);
      }
    }
  }

  // Returns false (and keeps the old shape) when the window was too short.
  auto refresh() -> bool {
    auto enough = n_ >= 20;
    if (enough) {
      for (auto i = 0u; i != sd_.size(); ++i) {
        sd_[i] = std::clamp(std::sqrt(m2_[i] / static_cast<double>(n_ - 1)), 0.02, 3.0);
      }
      center_ = mean_;
    }
    mean_.fill(0.0);
    m2_.fill(0.0);
    n_ = 0;
    return enough;
  }

 private:
  static auto index(int r, int t) -> std::size_t { return static_cast<std::size_t>(r * k_num_transitions + t); }

  std::array<double, k_num_regimes * k_num_transitions> sd_{};
  std::array<double, k_num_regimes * k_num_transitions> center_{};
  std::array<double, k_num_regimes * k_num_transitions> mean_{};
  std::array<double, k_num_regimes * k_num_transitions> m2_{};
  long n_ = 0;
};

// Full proposal covariance for the hypermeans of one regime, estimated the
// same way as ProposalShape.
class CovarianceShape {
 public:
  using Vector = Eigen::Matrix<double, k_num_transitions, 1>;
  using Matrix = Eigen::Matrix<double, k_num_transitions, k_num_transitions>;

  CovarianceShape() : chol_{Matrix::Identity() * 0.1} {}

  auto observe(const LivingRates& x) -> void {
    auto v = Eigen::Map<const Vector>{x.data()};
    ++n_;
    Vector d = v - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (v - mean_).transpose();
  }

  auto refresh() -> bool {
    auto enough = n_ >= 2 * k_num_transitions;
    if (enough) {
      Matrix cov = m2_ / static_cast<double>(n_ - 1) + Matrix::Identity() * 1e-4;
      auto llt = cov.llt();
      if (llt.info() == Eigen::Success) chol_ = llt.matrixL();
    }
    mean_.setZero();
    m2_.setZero();
    n_ = 0;
    return enough;
  }

  auto draw(std::normal_distribution<double>& normal, std::mt19937_64& rng) const -> Vector {
    Vector z;
    for (auto& x : z) x = normal(rng);
    return chol_ * z;
  }

 private:
  Matrix chol_;
  Vector mean_ = Vector::Zero();
  Matrix m2_ = Matrix::Zero();
  long n_ = 0;
};

// Scale for a 4-coordinate block once its shape is known.
constexpr double k_shaped_block_scale = 1.19;

// Per verb and rate: how far the verb moves with mu and sigma in the joint
// moves, 1 for rates the data say nothing about, near 0 for well-pinned ones.
using FollowWeights = std::array<double, k_num_regimes * k_num_transitions>;

// Cached per-verb likelihood state.
struct VerbCache {
  std::array<RateMatrix, 2> q;
  SegmentMatrices matrices;
  double loglik = 0.0;
};

class Chain {
 public:
  Chain(const PosteriorModel& model, ModelParams init, const SamplerConfig& cfg, std::mt19937_64 rng)
      : model_{model}, cfg_{cfg}, rng_{std::move(rng)}, params_{std::move(init)} {
    auto v = model_.num_verbs();
    hierarchical_ = has_verb_rates(params_.kind);
    if (hierarchical_) {
      caches_.resize(v);
      for (auto i = 0; i != v; ++i) refresh_verb(i, 0b11, caches_[i], params_.log_rho[i]);
      verb_scales_.assign(static_cast<std::size_t>(v) * k_num_regimes * k_num_living, AdaptiveScale{0.5});
      rho_shapes_.resize(v);
      auto all = FollowWeights{};
      all.fill(1.0);
      follows_.assign(v, all);
      sigma_scales_.assign(k_num_regimes * k_num_transitions, AdaptiveScale{0.3});
      shift_scales_.assign(k_num_regimes * k_num_living, AdaptiveScale{0.1});
      stretch_scales_.assign(k_num_regimes * k_num_living, AdaptiveScale{0.1});
    } else {
      shared_.resize(1);
      refresh_shared(0b11, shared_[0], params_.mu);
      loglik_.assign(v, 0.0);
      recompute_shared_logliks(shared_[0], loglik_);
      shift_scales_.assign(k_num_regimes * k_num_living, AdaptiveScale{0.2});
    }
  }

  auto run(int tree_index, int chain_index, std::vector<std::vector<double>>& out_params,
           std::vector<std::vector<double>>& out_pointwise, std::vector<double>& out_logpost,
           std::vector<DrawProvenance>& out_provenance) -> void {
    for (auto iter = 0; iter != cfg_.iterations; ++iter) {
      adapting_ = iter < cfg_.warmup;
      if (hierarchical_) {
        hierarchical_sweep();
      } else {
        flat_sweep();
      }
      update_delta();
      if (iter < cfg_.warmup) {
        adapt_shapes(iter);
        continue;
      }
      auto pointwise = current_pointwise();
      auto lp = log_prior(params_);
      for (auto ll : pointwise) lp += ll;
      out_params.push_back(params_.to_vector());
      out_pointwise.push_back(std::move(pointwise));
      out_logpost.push_back(lp);
      out_provenance.push_back({tree_index, chain_index, iter});
    }
  }

 private:
  const PosteriorModel& model_;
  const SamplerConfig& cfg_;
  std::mt19937_64 rng_;
  ModelParams params_;
  bool hierarchical_ = false;
  bool adapting_ = true;

  std::vector<VerbCache> caches_;       // hierarchical: one per verb
  std::vector<VerbCache> shared_;       // flat: a single shared cache
  std::vector<double> loglik_;          // flat: per-verb log-likelihoods
  AdaptiveScale delta_scale_{0.2};
  std::vector<AdaptiveScale> verb_scales_;
  std::vector<AdaptiveScale> sigma_scales_;
  std::vector<AdaptiveScale> shift_scales_;
  std::vector<AdaptiveScale> stretch_scales_;
  ProposalShape mu_shape_;
  std::array<CovarianceShape, k_num_regimes> mu_covariance_;
  std::array<AdaptiveScale, k_num_regimes> regime_shift_scales_{AdaptiveScale{1.0}, AdaptiveScale{1.0}};
  ProposalShape sigma_shape_;
  std::vector<ProposalShape> rho_shapes_;
  std::vector<FollowWeights> follows_;
  std::normal_distribution<double> normal_{0.0, 1.0};

  auto tune(AdaptiveScale& s, bool accepted) -> void {
    if (adapting_) s.update(accepted, cfg_.target_acceptance);
  }

  // Warmup windows end at 30%, 60% and 85% of warmup; the first 10% is skipped.
  auto adapt_shapes(int iter) -> void {
    auto w = cfg_.warmup;
    if (iter < w / 10) return;
    mu_shape_.observe(params_.mu);
    for (auto r = 0; r != k_num_regimes; ++r) mu_covariance_[r].observe(params_.mu[r]);
    if (hierarchical_) {
      sigma_shape_.observe(params_.log_sigma);
      for (auto v = 0u; v != rho_shapes_.size(); ++v) rho_shapes_[v].observe(params_.log_rho[v]);
    }
    auto end = iter + 1;
    if (end != w * 3 / 10 && end != w * 6 / 10 && end != w * 85 / 100) return;
    auto restart = [](std::vector<AdaptiveScale>& scales, std::size_t first, std::size_t count) {
      for (auto k = first; k != first + count; ++k) scales[k] = AdaptiveScale{k_shaped_block_scale};
    };
    if (mu_shape_.refresh()) restart(shift_scales_, 0, shift_scales_.size());
    for (auto r = 0; r != k_num_regimes; ++r) {
      // 2.38 / sqrt(20)
      if (mu_covariance_[r].refresh()) regime_shift_scales_[r] = AdaptiveScale{0.53};
    }
    if (!hierarchical_) return;
    if (sigma_shape_.refresh()) restart(stretch_scales_, 0, stretch_scales_.size());
    auto per_verb = static_cast<std::size_t>(k_num_regimes * k_num_living);
    for (auto v = 0u; v != rho_shapes_.size(); ++v) {
      if (rho_shapes_[v].refresh()) restart(verb_scales_, v * per_verb, per_verb);
    }
    set_follow_weights();
  }

  // Weight 1 / (1 + sigma^2 tau), with tau the likelihood curvature in the
  // verb's log-rate at the current state (a central difference).
  auto set_follow_weights() -> void {
    constexpr double h = 0.1;
    for (auto v = 0u; v != caches_.size(); ++v) {
      for (auto r = 0; r != k_num_regimes; ++r) {
        for (auto t = 0; t != k_num_transitions; ++t) {
          auto ll = [&](double dx) {
            auto rates = params_.log_rho[v];
            rates[r][t] += dx;
            auto cache = caches_[v];
            refresh_verb(static_cast<int>(v), 1u << r, cache, rates);
            return cache.loglik;
          };
          auto tau = -(ll(h) - 2.0 * caches_[v].loglik + ll(-h)) / (h * h);
          if (!std::isfinite(tau)) continue;
          auto sigma = std::exp(params_.log_sigma[r][t]);
          auto w = 1.0 / (1.0 + sigma * sigma * std::max(tau, 0.0));
          follows_[v][static_cast<std::size_t>(r * k_num_transitions + t)] = w < 0.01 ? 0.0 : w;
        }
      }
    }
  }

  auto follows(std::size_t v, int r, int t) const -> double {
    return follows_[v][static_cast<std::size_t>(r * k_num_transitions + t)];
  }

  auto delta() const -> double { return std::exp(params_.log_delta); }

  auto refresh_matrices(VerbCache& cache, unsigned mask) const -> void {
    auto by_regime = std::array<const RateMatrix*, 2>{&cache.q[0], &cache.q[1]};
    fill_segment_matrices(model_.plan(), by_regime, cache.matrices, mask);
  }

  auto refresh_verb(int verb, unsigned mask, VerbCache& cache, const RegimeRates& log_rates) const -> void {
    try {
      for (auto r = 0; r != k_num_regimes; ++r) {
        if (mask & (1u << r)) cache.q[r] = RateMatrix::build(exp_rates(log_rates[r]), delta());
      }
      refresh_matrices(cache, mask);
      cache.loglik = plan_log_likelihood(model_.plan(), cache.matrices, model_.tips(verb), model_.root_prior());
    } catch (const Error&) {
      // Rates so extreme that the exponential is unusable: the proposal is rejected.
      cache.loglik = -std::numeric_limits<double>::infinity();
    }
  }

  auto refresh_shared(unsigned mask, VerbCache& cache, const RegimeRates& mu) const -> void {
    try {
      for (auto r = 0; r != k_num_regimes; ++r) {
        if (mask & (1u << r)) cache.q[r] = RateMatrix::build(exp_rates(mu[r]), delta());
      }
      refresh_matrices(cache, mask);
      cache.loglik = 0.0;
    } catch (const Error&) {
      cache.loglik = -std::numeric_limits<double>::infinity();
    }
  }

  auto recompute_shared_logliks(const VerbCache& cache, std::vector<double>& out) const -> double {
    if (std::isinf(cache.loglik)) {
      std::fill(out.begin(), out.end(), cache.loglik);
      return cache.loglik;
    }
    auto total = 0.0;
    for (auto v = 0; v != model_.num_verbs(); ++v) {
      out[v] = plan_log_likelihood(model_.plan(), cache.matrices, model_.tips(v), model_.root_prior());
      total += out[v];
    }
    return total;
  }

  auto current_pointwise() const -> std::vector<double> {
    if (!hierarchical_) return loglik_;
    auto out = std::vector<double>(caches_.size());
    for (auto v = 0u; v != caches_.size(); ++v) out[v] = caches_[v].loglik;
    return out;
  }

  // ---- hierarchical moves ----

  auto hierarchical_sweep() -> void {
    for (auto v = 0; v != model_.num_verbs(); ++v) {
      for (auto r = 0; r != k_num_regimes; ++r) {
        for (auto i = 0; i != k_num_living; ++i) update_verb_block(v, r, i);
      }
    }
    for (auto r = 0; r != k_num_regimes; ++r) {
      for (auto t = 0; t != k_num_transitions; ++t) {
        gibbs_mu(r, t);
        update_sigma(r, t);
      }
      for (auto i = 0; i != k_num_living; ++i) {
        shift_block(r, i);
        stretch_block(r, i);
      }
      shift_regime(r);
    }
  }

  auto update_verb_block(int v, int r, int source) -> void {
    auto& scale = verb_scales_[(static_cast<std::size_t>(v) * k_num_regimes + r) * k_num_living + source];
    auto proposal = params_.log_rho[v];
    auto log_ratio = 0.0;
    for (auto t : block_transitions(source)) {
      auto sigma = std::exp(params_.log_sigma[r][t]);
      proposal[r][t] += scale.scale() * rho_shapes_[v].sd(r, t) * normal_(rng_);
      log_ratio += normal_log_density(proposal[r][t], params_.mu[r][t], sigma) -
                   normal_log_density(params_.log_rho[v][r][t], params_.mu[r][t], sigma);
    }
    auto candidate = caches_[v];
    refresh_verb(v, 1u << r, candidate, proposal);
    log_ratio += candidate.loglik - caches_[v].loglik;
    auto ok = accept(log_ratio, rng_);
    if (ok) {
      params_.log_rho[v] = proposal;
      caches_[v] = std::move(candidate);
    }
    tune(scale, ok);
  }

  // Exact conditional: Normal(0, 1) prior times Normal(rho | mu, sigma) for every verb.
  auto gibbs_mu(int r, int t) -> void {
    auto sigma2 = std::exp(2.0 * params_.log_sigma[r][t]);
    auto sum = 0.0;
    for (const auto& verb : params_.log_rho) sum += verb[r][t];
    auto precision = 1.0 + model_.num_verbs() / sigma2;
    auto mean = (sum / sigma2) / precision;
    params_.mu[r][t] = mean + normal_(rng_) / std::sqrt(precision);
  }

  auto sigma_conditional(int r, int t, double log_sigma) const -> double {
    auto sigma = std::exp(log_sigma);
    auto lp = log_sigma_prior(log_sigma);
    for (const auto& verb : params_.log_rho) lp += normal_log_density(verb[r][t], params_.mu[r][t], sigma);
    return lp;
  }

  auto update_sigma(int r, int t) -> void {
    auto& scale = sigma_scales_[r * k_num_transitions + t];
    auto current = params_.log_sigma[r][t];
    auto proposal = current + scale.scale() * normal_(rng_);
    auto ok = accept(sigma_conditional(r, t, proposal) - sigma_conditional(r, t, current), rng_);
    if (ok) params_.log_sigma[r][t] = proposal;
    tune(scale, ok);
  }

  // Applies `transform` to the verbs' rates in regime r.  `transform` returns
  // false when it left a verb unchanged; only changed verbs are recomputed.
  template <typename Transform>
  auto joint_verb_move(int r, Transform&& transform, double log_ratio) -> bool {
    auto proposals = params_.log_rho;
    auto changed = std::vector<std::size_t>{};
    for (auto v = 0u; v != caches_.size(); ++v) {
      if (transform(v, proposals[v][r])) changed.push_back(v);
    }
    auto candidates = std::vector<VerbCache>(changed.size());
    for (auto k = 0u; k != changed.size(); ++k) {
      auto v = changed[k];
      candidates[k] = caches_[v];
      refresh_verb(static_cast<int>(v), 1u << r, candidates[k], proposals[v]);
      log_ratio += candidates[k].loglik - caches_[v].loglik;
    }
    if (!accept(log_ratio, rng_)) return false;
    for (auto k = 0u; k != changed.size(); ++k) {
      auto v = changed[k];
      params_.log_rho[v][r] = proposals[v][r];
      caches_[v] = std::move(candidates[k]);
    }
    return true;
  }

  // Moves mu[r][t] by c_t and each verb's rate by w c_t, where w is its
  // follow weight.
  template <std::size_t N>
  auto shift(int r, const std::array<int, N>& transitions, const std::array<double, N>& offsets) -> bool {
    auto log_ratio = 0.0;
    for (auto k = 0u; k != N; ++k) {
      auto t = transitions[k];
      auto mu = params_.mu[r][t];
      auto sigma = std::exp(params_.log_sigma[r][t]);
      log_ratio += normal_log_density(mu + offsets[k], 0.0, 1.0) - normal_log_density(mu, 0.0, 1.0);
      for (auto v = 0u; v != caches_.size(); ++v) {
        auto x = params_.log_rho[v][r][t];
        auto moved = x + follows(v, r, t) * offsets[k];
        log_ratio += normal_log_density(moved, mu + offsets[k], sigma) - normal_log_density(x, mu, sigma);
      }
    }
    auto ok = joint_verb_move(
        r,
        [&](std::size_t v, LivingRates& rates) {
          auto changed = false;
          for (auto k = 0u; k != N; ++k) {
            auto w = follows(v, r, transitions[k]);
            if (w == 0.0) continue;
            rates[transitions[k]] += w * offsets[k];
            changed = true;
          }
          return changed;
        },
        log_ratio);
    if (ok) {
      for (auto k = 0u; k != N; ++k) params_.mu[r][transitions[k]] += offsets[k];
    }
    return ok;
  }

  auto shift_block(int r, int source) -> void {
    auto& scale = shift_scales_[r * k_num_living + source];
    auto offsets = std::array<double, k_block>{};
    auto transitions = block_transitions(source);
    for (auto k = 0; k != k_block; ++k) offsets[k] = scale.scale() * mu_shape_.sd(r, transitions[k]) * normal_(rng_);
    tune(scale, shift(r, transitions, offsets));
  }

  // All hypermeans of a regime at once, along the warmup covariance.
  auto shift_regime(int r) -> void {
    auto& scale = regime_shift_scales_[r];
    auto step = mu_covariance_[r].draw(normal_, rng_);
    auto transitions = std::array<int, k_num_transitions>{};
    auto offsets = std::array<double, k_num_transitions>{};
    for (auto t = 0; t != k_num_transitions; ++t) {
      transitions[t] = t;
      offsets[t] = scale.scale() * step(t);
    }
    tune(scale, shift(r, transitions, offsets));
  }

  // Multiplies sigma by f and each verb's deviation from mu by f^w.  The map
  // has Jacobian f^w per verb.
  auto stretch_block(int r, int source) -> void {
    auto& scale = stretch_scales_[r * k_num_living + source];
    auto log_factors = std::array<double, k_block>{};
    auto log_ratio = 0.0;
    auto transitions = block_transitions(source);
    for (auto k = 0; k != k_block; ++k) {
      auto t = transitions[k];
      log_factors[k] = scale.scale() * sigma_shape_.sd(r, t) * normal_(rng_);
      auto ls = params_.log_sigma[r][t];
      auto mu = params_.mu[r][t];
      log_ratio += log_sigma_prior(ls + log_factors[k]) - log_sigma_prior(ls);
      for (auto v = 0u; v != caches_.size(); ++v) {
        auto x = params_.log_rho[v][r][t];
        auto w = follows(v, r, t);
        auto moved = mu + std::exp(w * log_factors[k]) * (x - mu);
        log_ratio += normal_log_density(moved, mu, std::exp(ls + log_factors[k])) -
                     normal_log_density(x, mu, std::exp(ls)) + w * log_factors[k];
      }
    }
    auto ok = joint_verb_move(
        r,
        [&](std::size_t v, LivingRates& rates) {
          auto changed = false;
          for (auto k = 0; k != k_block; ++k) {
            auto t = transitions[k];
            auto w = follows(v, r, t);
            if (w == 0.0) continue;
            rates[t] = params_.mu[r][t] + std::exp(w * log_factors[k]) * (rates[t] - params_.mu[r][t]);
            changed = true;
          }
          return changed;
        },
        log_ratio);
    if (ok) {
      for (auto k = 0; k != k_block; ++k) params_.log_sigma[r][transitions[k]] += log_factors[k];
    }
    tune(scale, ok);
  }

  // ---- flat moves ----

  auto flat_sweep() -> void {
    for (auto r = 0; r != k_num_regimes; ++r) {
      for (auto i = 0; i != k_num_living; ++i) {
        auto& scale = shift_scales_[r * k_num_living + i];
        auto proposal = params_.mu;
        for (auto t : block_transitions(i)) proposal[r][t] += scale.scale() * mu_shape_.sd(r, t) * normal_(rng_);
        tune(scale, flat_move(r, proposal));
      }
      auto& scale = regime_shift_scales_[r];
      auto step = mu_covariance_[r].draw(normal_, rng_);
      auto proposal = params_.mu;
      for (auto t = 0; t != k_num_transitions; ++t) proposal[r][t] += scale.scale() * step(t);
      tune(scale, flat_move(r, proposal));
    }
  }

  auto flat_move(int r, const RegimeRates& proposal) -> bool {
    auto log_ratio = 0.0;
    for (auto t = 0; t != k_num_transitions; ++t) {
      log_ratio += normal_log_density(proposal[r][t], 0.0, 1.0) - normal_log_density(params_.mu[r][t], 0.0, 1.0);
    }
    auto candidate = shared_[0];
    refresh_shared(1u << r, candidate, proposal);
    auto logliks = std::vector<double>(loglik_.size());
    auto total_new = recompute_shared_logliks(candidate, logliks);
    auto total_old = 0.0;
    for (auto ll : loglik_) total_old += ll;
    auto ok = accept(log_ratio + total_new - total_old, rng_);
    if (ok) {
      params_.mu = proposal;
      shared_[0] = std::move(candidate);
      loglik_ = std::move(logliks);
    }
    return ok;
  }

  // ---- death rate ----

  auto update_delta() -> void {
    auto current = params_.log_delta;
    auto proposal = current + delta_scale_.scale() * normal_(rng_);
    // log_delta ~ Normal(0, 1) on the unconstrained scale.
    auto log_ratio = normal_log_density(proposal, 0.0, 1.0) - normal_log_density(current, 0.0, 1.0);
    params_.log_delta = proposal;
    auto ok = false;
    if (hierarchical_) {
      auto candidates = caches_;
      for (auto v = 0u; v != caches_.size(); ++v) {
        refresh_verb(static_cast<int>(v), 0b11, candidates[v], params_.log_rho[v]);
        log_ratio += candidates[v].loglik - caches_[v].loglik;
      }
      ok = accept(log_ratio, rng_);
      if (ok) caches_ = std::move(candidates);
    } else {
      auto candidate = shared_[0];
      refresh_shared(0b11, candidate, params_.mu);
      auto logliks = std::vector<double>(loglik_.size());
      auto total_new = recompute_shared_logliks(candidate, logliks);
      auto total_old = 0.0;
      for (auto ll : loglik_) total_old += ll;
      ok = accept(log_ratio + total_new - total_old, rng_);
      if (ok) {
        shared_[0] = std::move(candidate);
        loglik_ = std::move(logliks);
      }
    }
    if (!ok) params_.log_delta = current;
    tune(delta_scale_, ok);
  }
};

}  // namespace

auto SamplerConfig::validate() const -> void {
  if (iterations <= 0) throw Error{"sampler: iterations must be > 0"};
  if (warmup < 0 || warmup >= iterations) throw Error{"sampler: need 0 <= warmup < iterations"};
  if (chains < 1) throw Error{"sampler: need at least one chain"};
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) throw Error{"sampler: target acceptance in (0, 1)"};
  if (threads < 1) throw Error{"sampler: threads must be >= 1"};
}

auto AdaptiveScale::update(bool accepted, double target) -> void {
  ++proposals_;
  if (accepted) ++accepted_;
  ++adapt_steps_;
  auto gain = std::pow(static_cast<double>(adapt_steps_), -0.6);
  log_scale_ += gain * ((accepted ? 1.0 : 0.0) - target);
  log_scale_ = std::clamp(log_scale_, std::log(1e-4), std::log(20.0));
}

auto chain_rng(std::uint64_t seed, int tree, int chain) -> std::mt19937_64 {
  auto seq = std::seed_seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                           static_cast<std::uint32_t>(tree), static_cast<std::uint32_t>(chain), 0x5eedu};
  return std::mt19937_64{seq};
}

auto initialize(const PosteriorModel& model, std::mt19937_64& rng) -> ModelParams {
  auto uniform = std::uniform_real_distribution<double>{-2.0, 2.0};
  auto n = parameter_count(model.kind(), model.num_verbs());
  for (auto attempt = 0; attempt != 100; ++attempt) {
    auto values = std::vector<double>(n);
    for (auto& x : values) x = uniform(rng);
    auto params = ModelParams::from_vector(model.kind(), model.num_verbs(), values);
    if (std::isfinite(model.log_posterior(params))) return params;
  }
  throw Error{"initialize: no finite log posterior after 100 attempts"};
}

auto PosteriorPool::params(int draw) const -> ModelParams {
  auto row = std::vector<double>(draws.cols());
  for (auto c = 0; c != draws.cols(); ++c) row[c] = draws(draw, c);
  return ModelParams::from_vector(kind, static_cast<int>(verbs.size()), row);
}

auto PosteriorPool::column(const std::string& name) const -> int {
  for (auto c = 0u; c != param_names.size(); ++c) {
    if (param_names[c] == name) return static_cast<int>(c);
  }
  throw Error{"pool has no parameter '" + name + "'"};
}

auto sample(const std::vector<PosteriorModel>& models, const SamplerConfig& cfg) -> PosteriorPool {
  cfg.validate();
  if (models.empty()) throw Error{"sample: need at least one painted tree"};
  const auto& first = models.front();
  for (const auto& m : models) {
    if (m.kind() != first.kind() || m.data().verbs() != first.data().verbs()) {
      throw Error{"sample: all models must share kind and verbs"};
    }
  }

  struct ChainOutput {
    std::vector<std::vector<double>> params;
    std::vector<std::vector<double>> pointwise;
    std::vector<double> logpost;
    std::vector<DrawProvenance> provenance;
    std::string error;
  };
  auto num_jobs = static_cast<int>(models.size()) * cfg.chains;
  auto outputs = std::vector<ChainOutput>(num_jobs);
  auto next = std::atomic<int>{0};

  auto worker = [&] {
    while (true) {
      auto job = next.fetch_add(1);
      if (job >= num_jobs) return;
      auto tree = job / cfg.chains;
      auto chain = job % cfg.chains;
      auto& out = outputs[job];
      try {
        auto rng = chain_rng(cfg.seed, tree, chain);
        auto init = initialize(models[tree], rng);
        auto runner = Chain{models[tree], std::move(init), cfg, std::move(rng)};
        runner.run(tree, chain, out.params, out.pointwise, out.logpost, out.provenance);
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    }
  };
  auto workers = std::min(cfg.threads, num_jobs);
  if (workers <= 1) {
    worker();
  } else {
    auto pool = std::vector<std::jthread>{};
    for (auto k = 0; k != workers; ++k) pool.emplace_back(worker);
  }
  for (const auto& out : outputs) {
    if (!out.error.empty()) throw Error{"sample: " + out.error};
  }

  auto pool = PosteriorPool{};
  pool.kind = first.kind();
  pool.verbs = first.data().verbs();
  pool.param_names = parameter_names(pool.kind, pool.verbs);
  pool.num_trees = static_cast<int>(models.size());
  pool.chains = cfg.chains;
  auto per_chain = cfg.iterations - cfg.warmup;
  auto rows = num_jobs * per_chain;
  pool.draws.resize(rows, static_cast<Eigen::Index>(pool.param_names.size()));
  pool.pointwise.resize(rows, static_cast<Eigen::Index>(pool.verbs.size()));
  auto row = 0;
  for (auto& out : outputs) {
    for (auto k = 0; k != per_chain; ++k, ++row) {
      for (auto c = 0u; c != out.params[k].size(); ++c) pool.draws(row, c) = out.params[k][c];
      for (auto c = 0u; c != out.pointwise[k].size(); ++c) pool.pointwise(row, c) = out.pointwise[k][c];
      pool.log_posterior.push_back(out.logpost[k]);
      pool.provenance.push_back(out.provenance[k]);
      if (cfg.sink) cfg.sink(DrawRecord{out.provenance[k], out.logpost[k], &out.params[k], &out.pointwise[k]});
    }
    out = ChainOutput{};
  }

  pool.rhat = rhat_all(pool);
  if (pool.chains >= 2) {
    for (auto c = 0u; c != pool.param_names.size(); ++c) {
      const auto& name = pool.param_names[c];
      if (!(name == "log_delta" || name.starts_with("mu["))) continue;
      if (pool.rhat[c] > cfg.rhat_threshold) {
        pool.warnings.push_back("R-hat " + std::to_string(pool.rhat[c]) + " for " + name);
      }
    }
  }
  return pool;
}

auto sample(ModelKind kind, const CharacterMatrix& data, const std::vector<PaintedTree>& painted_trees,
            const SamplerConfig& cfg, RootPrior root_prior) -> PosteriorPool {
  auto models = std::vector<PosteriorModel>{};
  for (const auto& painted : painted_trees) models.emplace_back(kind, data, painted, root_prior);
  return sample(models, cfg);
}

auto random_walk_metropolis(const std::function<double(const Eigen::VectorXd&)>& log_density,
                            const Eigen::VectorXd& init, int iterations, int warmup, double target_acceptance,
                            std::mt19937_64& rng) -> Eigen::MatrixXd {
  auto dim = init.size();
  auto scales = std::vector<AdaptiveScale>(dim, AdaptiveScale{1.0});
  auto normal = std::normal_distribution<double>{0.0, 1.0};
  Eigen::VectorXd x = init;
  auto lp = log_density(x);
  Eigen::MatrixXd out(iterations - warmup, dim);
  for (auto iter = 0; iter != iterations; ++iter) {
    for (auto d = 0; d != dim; ++d) {
      Eigen::VectorXd y = x;
      y(d) += scales[d].scale() * normal(rng);
      auto lq = log_density(y);
      auto ok = accept(lq - lp, rng);
      if (ok) {
        x = y;
        lp = lq;
      }
      if (iter < warmup) scales[d].update(ok, target_acceptance);
    }
    if (iter >= warmup) out.row(iter - warmup) = x.transpose();
  }
  return out;
}

}  // namespace stemalt
