#include "stemalt/diagnostics.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stemalt/mcmc.h"

namespace stemalt {

namespace {

auto mean_of(std::span<const double> x) -> double {
  auto s = 0.0;
  for (auto v : x) s += v;
  return s / static_cast<double>(x.size());
}

}  // namespace

auto split_rhat(const std::vector<std::vector<double>>& chains) -> RhatResult {
  if (chains.size() < 2) throw Error{"rhat: need at least two chains"};
  auto n_chain = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != n_chain) throw Error{"rhat: chains have different lengths"};
  }
  if (n_chain < 10) throw Error{"rhat: need at least 10 draws per chain"};

  auto half = n_chain / 2;
  auto halves = std::vector<std::span<const double>>{};
  for (const auto& c : chains) {
    // An odd draw in the middle is dropped.
    halves.emplace_back(c.data(), half);
    halves.emplace_back(c.data() + n_chain - half, half);
  }
  auto m = static_cast<double>(halves.size());
  auto n = static_cast<double>(half);
  auto means = std::vector<double>{};
  auto within = 0.0;
  for (auto h : halves) {
    auto mu = mean_of(h);
    means.push_back(mu);
    auto ss = 0.0;
    for (auto v : h) ss += (v - mu) * (v - mu);
    within += ss / (n - 1.0);
  }
  within /= m;
  auto grand = mean_of(means);
  auto between = 0.0;
  for (auto mu : means) between += (mu - grand) * (mu - grand);
  between *= n / (m - 1.0);

  if (within <= 0.0) {
    if (between <= 0.0) return {1.0, true};
    return {std::numeric_limits<double>::infinity(), false};
  }
  auto var_plus = (n - 1.0) / n * within + between / n;
  return {std::sqrt(var_plus / within), false};
}

auto rhat(const PosteriorPool& pool, int column) -> RhatResult {
  if (pool.chains < 2) throw Error{"rhat: need at least two chains"};
  auto worst = RhatResult{1.0, true};
  auto per_tree = pool.num_draws() / pool.num_trees;
  auto per_chain = per_tree / pool.chains;
  for (auto tree = 0; tree != pool.num_trees; ++tree) {
    auto chains = std::vector<std::vector<double>>(pool.chains);
    for (auto c = 0; c != pool.chains; ++c) {
      auto first = tree * per_tree + c * per_chain;
      for (auto k = 0; k != per_chain; ++k) chains[c].push_back(pool.draws(first + k, column));
    }
    auto r = split_rhat(chains);
    if (!r.zero_variance) worst.zero_variance = false;
    if (!(r.value <= worst.value)) worst.value = r.value;
  }
  return worst;
}

auto rhat_all(const PosteriorPool& pool) -> std::vector<double> {
  auto out = std::vector<double>(pool.param_names.size(), std::numeric_limits<double>::quiet_NaN());
  if (pool.chains < 2 || pool.num_draws() / std::max(1, pool.num_trees * pool.chains) < 10) return out;
  for (auto c = 0u; c != out.size(); ++c) out[c] = rhat(pool, static_cast<int>(c)).value;
  return out;
}

}  // namespace stemalt
