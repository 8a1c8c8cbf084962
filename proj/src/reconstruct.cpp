#include <cmath>
#include <random>

#include "stemalt/analysis.h"

namespace stemalt {

namespace {

// First column of a verb's 40 log-rates (regime-major) in the pool.
auto verb_rate_column(ModelKind kind, int verb) -> int {
  constexpr auto block = k_num_regimes * k_num_transitions;
  if (!has_verb_rates(kind)) return 1;
  return 1 + 2 * block + verb * block;
}

auto reconstruct_one(const PosteriorPool& pool, const std::vector<PosteriorModel>& models, int verb,
                     std::uint64_t seed) -> RootReconstruction {
  if (static_cast<int>(models.size()) != pool.num_trees) {
    throw Error{"reconstruct_root: pool has " + std::to_string(pool.num_trees) + " trees but " +
                std::to_string(models.size()) + " were given"};
  }
  for (const auto& model : models) {
    if (pool.verbs != model.data().verbs()) throw Error{"reconstruct_root: pool and data have different verbs"};
  }
  if (verb < 0 || verb >= static_cast<int>(pool.verbs.size())) throw Error{"reconstruct_root: verb index out of range"};
  auto out = RootReconstruction{};
  out.verb = pool.verbs[verb];
  auto seq = std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                           static_cast<std::uint32_t>(verb)};
  auto rng = std::mt19937_64{seq};
  auto uniform = std::uniform_real_distribution<double>{0.0, 1.0};
  auto first = verb_rate_column(pool.kind, verb);
  auto q = std::array<RateMatrix, 2>{};
  auto by_regime = std::array<const RateMatrix*, 2>{&q[0], &q[1]};
  auto matrices = SegmentMatrices{};
  auto rates = LivingRates{};
  for (auto d = 0; d != pool.num_draws(); ++d) {
    const auto& model = models[pool.provenance[d].tree];
    auto death = std::exp(pool.draws(d, 0));
    for (auto r = 0; r != k_num_regimes; ++r) {
      for (auto t = 0; t != k_num_transitions; ++t) rates[t] = std::exp(pool.draws(d, first + r * k_num_transitions + t));
      q[r] = RateMatrix::build(rates, death);
    }
    fill_segment_matrices(model.plan(), by_regime, matrices);
    auto log_scale = 0.0;
    Vector6 p = model.root_prior().cwiseProduct(plan_root_partials(model.plan(), matrices, model.tips(verb), log_scale));
    p /= p.sum();
    out.mean_probabilities += p;
    auto u = uniform(rng);
    auto state = 0;
    for (auto acc = p(0); state < k_num_states - 1 && u >= acc; acc += p(++state)) {
    }
    out.frequencies(state) += 1.0;
  }
  auto n = static_cast<double>(pool.num_draws());
  out.frequencies /= n;
  out.mean_probabilities /= n;
  // State indices follow the lexicographic order of the state names.
  out.frequencies.maxCoeff(&out.modal);
  for (auto s = out.modal + 1; s != k_num_states; ++s) {
    if (out.frequencies(s) == out.frequencies(out.modal)) out.tie = true;
  }
  return out;
}

}  // namespace

auto reconstruct_root(const PosteriorPool& pool, const std::vector<PosteriorModel>& models, int verb,
                      std::uint64_t seed) -> RootReconstruction {
  return reconstruct_one(pool, models, verb, seed);
}

auto reconstruct_all(const PosteriorPool& pool, const std::vector<PosteriorModel>& models, std::uint64_t seed)
    -> std::vector<RootReconstruction> {
  auto out = std::vector<RootReconstruction>{};
  for (auto v = 0; v != static_cast<int>(pool.verbs.size()); ++v) out.push_back(reconstruct_one(pool, models, v, seed));
  return out;
}

}  // namespace stemalt
