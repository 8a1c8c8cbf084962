#include <algorithm>
#include <cmath>
#include <numeric>

#include "stemalt/analysis.h"

namespace stemalt {

namespace {

auto log_sum_exp(std::span<const double> x) -> double {
  auto m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  auto s = 0.0;
  for (auto v : x) s += std::exp(v - m);
  return m + std::log(s);
}

auto sample_sd_scaled(const std::vector<double>& x) -> double {
  auto n = x.size();
  if (n < 2) return 0.0;
  auto mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  auto ss = 0.0;
  for (auto v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(static_cast<double>(n) * ss / static_cast<double>(n - 1));
}

constexpr int k_min_draws = 100;

}  // namespace

auto fit_generalized_pareto(std::span<const double> x) -> GpdFit {
  auto n = static_cast<int>(x.size());
  if (n < 2) throw Error{"gpd fit: need at least two exceedances"};
  constexpr double prior = 3.0;
  auto m = 30 + static_cast<int>(std::floor(std::sqrt(static_cast<double>(n))));
  auto xstar = x[static_cast<std::size_t>(std::floor(n / 4.0 + 0.5)) - 1];
  auto theta = std::vector<double>(m);
  auto log_lik = std::vector<double>(m);
  for (auto j = 0; j != m; ++j) {
    theta[j] = 1.0 / x[n - 1] + (1.0 - std::sqrt(m / (j + 0.5))) / prior / xstar;
    auto k = 0.0;
    for (auto v : x) k += std::log1p(-theta[j] * v);
    k /= n;
    log_lik[j] = n * (std::log(-theta[j] / k) - k - 1.0);
  }
  auto norm = log_sum_exp(log_lik);
  auto theta_hat = 0.0;
  for (auto j = 0; j != m; ++j) theta_hat += theta[j] * std::exp(log_lik[j] - norm);
  auto k = 0.0;
  for (auto v : x) k += std::log1p(-theta_hat * v);
  k /= n;
  auto sigma = -k / theta_hat;
  // Shrink toward 0.5 as if 10 extra observations sat there.
  k = (k * n + 5.0) / (n + 10.0);
  if (std::isnan(k)) k = INFINITY;
  return {k, sigma};
}

auto pareto_smooth(std::vector<double>& log_ratios) -> double {
  auto s = log_ratios.size();
  auto max = *std::max_element(log_ratios.begin(), log_ratios.end());
  for (auto& v : log_ratios) v -= max;
  auto tail = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(s)));
  auto order = std::vector<std::size_t>(s);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return log_ratios[a] < log_ratios[b]; });
  auto cutoff = log_ratios[order[s - tail - 1]];
  if (!(log_ratios[order[s - 1]] > cutoff) || tail < 5) return -INFINITY;

  auto exp_cutoff = std::exp(cutoff);
  auto exceed = std::vector<double>(tail);
  for (auto i = 0u; i != tail; ++i) exceed[i] = std::exp(log_ratios[order[s - tail + i]]) - exp_cutoff;
  auto fit = fit_generalized_pareto(exceed);
  if (std::isfinite(fit.k) && fit.sigma > 0.0) {
    for (auto i = 0u; i != tail; ++i) {
      auto p = (i + 0.5) / static_cast<double>(tail);
      auto q = fit.sigma * std::expm1(-fit.k * std::log1p(-p)) / fit.k + exp_cutoff;
      log_ratios[order[s - tail + i]] = std::min(std::log(q), 0.0);
    }
  }
  return fit.k;
}

auto psis_loo(const Eigen::MatrixXd& loglik, bool smooth) -> LooResult {
  auto draws = static_cast<int>(loglik.rows());
  auto v_count = static_cast<int>(loglik.cols());
  if (draws < 1) throw Error{"psis_loo: no draws"};
  auto result = LooResult{};
  result.pointwise.resize(v_count);
  result.pareto_k.assign(v_count, -INFINITY);
  auto can_smooth = smooth && draws >= k_min_draws;
  if (smooth && !can_smooth) {
    result.warnings.push_back("psis_loo: fewer than " + std::to_string(k_min_draws) +
                              " draws, importance ratios left unsmoothed");
  }
  auto log_w = std::vector<double>(draws);
  auto terms = std::vector<double>(draws);
  auto high_k = 0;
  for (auto v = 0; v != v_count; ++v) {
    for (auto d = 0; d != draws; ++d) log_w[d] = -loglik(d, v);
    if (can_smooth) {
      result.pareto_k[v] = pareto_smooth(log_w);
      if (result.pareto_k[v] > 0.7) ++high_k;
    }
    for (auto d = 0; d != draws; ++d) terms[d] = log_w[d] + loglik(d, v);
    result.pointwise[v] = log_sum_exp(terms) - log_sum_exp(log_w);
  }
  if (high_k > 0) result.warnings.push_back(std::to_string(high_k) + " observations with Pareto k > 0.7");
  result.elpd = std::accumulate(result.pointwise.begin(), result.pointwise.end(), 0.0);
  result.se = sample_sd_scaled(result.pointwise);
  return result;
}

auto compare(const LooResult& a, const LooResult& b) -> LooComparison {
  if (a.pointwise.size() != b.pointwise.size()) {
    throw Error{"compare: results cover " + std::to_string(a.pointwise.size()) + " and " +
                std::to_string(b.pointwise.size()) + " observations"};
  }
  auto diffs = std::vector<double>(a.pointwise.size());
  for (auto i = 0u; i != diffs.size(); ++i) diffs[i] = a.pointwise[i] - b.pointwise[i];
  return {std::accumulate(diffs.begin(), diffs.end(), 0.0), sample_sd_scaled(diffs)};
}

}  // namespace stemalt
