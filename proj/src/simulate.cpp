#include "stemalt/simulate.h"

#include <cmath>
#include <cstdio>

namespace stemalt {

auto SimConfig::validate() const -> void {
  if (num_verbs < 1) throw Error{"simulation: need at least one verb"};
  if (!(death >= 0.0) || !std::isfinite(death)) throw Error{"simulation: death rate must be >= 0"};
  if (!(sigma >= 0.0)) throw Error{"simulation: sigma must be >= 0"};
  if (!(e_abb_exit_multiplier >= 0.0)) throw Error{"simulation: multiplier must be >= 0"};
  for (auto level : hdi_levels) {
    if (!(level > 0.0 && level < 1.0)) throw Error{"simulation: HDI levels must be in (0, 1)"};
  }
}

auto draw_verb_rates(const SimConfig& cfg, std::mt19937_64& rng) -> std::vector<SimulatedVerb> {
  cfg.validate();
  auto normal = std::normal_distribution<double>{0.0, 1.0};
  auto abb = static_cast<int>(PatternState::ABB);
  auto verbs = std::vector<SimulatedVerb>{};
  for (auto v = 0; v != cfg.num_verbs; ++v) {
    auto rates = LivingRates{};
    for (auto& r : rates) r = std::exp(cfg.mu + cfg.sigma * normal(rng));
    auto verb = SimulatedVerb{};
    verb.q[static_cast<int>(Regime::N)] = RateMatrix::build(rates, cfg.death);
    for (auto t = 0; t != k_num_transitions; ++t) {
      if (transition_source(t) == abb) rates[t] *= cfg.e_abb_exit_multiplier;
    }
    verb.q[static_cast<int>(Regime::E)] = RateMatrix::build(rates, cfg.death);
    verb.root_state = static_cast<int>(cfg.root_state);
    verbs.push_back(verb);
  }
  return verbs;
}

auto simulate_characters(const PaintedTree& painted, const std::vector<SimulatedVerb>& verbs, std::mt19937_64& rng)
    -> CharacterMatrix {
  const auto& tree = painted.tree();
  auto taxa = tree.tip_labels();
  auto names = std::vector<std::string>{};
  auto cells = std::vector<std::vector<int>>{};
  auto state_at = std::vector<int>(tree.size());
  char name[32];
  for (auto v = 0u; v != verbs.size(); ++v) {
    std::snprintf(name, sizeof name, "v%03u", v + 1);
    names.emplace_back(name);
    for (auto n : tree.preorder()) {
      if (n == tree.root()) {
        state_at[n] = verbs[v].root_state;
        continue;
      }
      auto s = static_cast<PatternState>(state_at[tree.at(n).parent]);
      for (const auto& seg : painted.segments(n)) {
        auto path = simulate_path(verbs[v].q[static_cast<int>(seg.regime)], s, seg.length, rng);
        s = path.back().state;
      }
      state_at[n] = static_cast<int>(s);
    }
    auto row = std::vector<int>{};
    for (const auto& taxon : taxa) row.push_back(state_at[*tree.find_tip(taxon)]);
    cells.push_back(std::move(row));
  }
  return CharacterMatrix{std::move(names), std::move(taxa), std::move(cells)};
}

auto simulate_dataset(const SimConfig& cfg, const PaintedTree& painted) -> CharacterMatrix {
  auto rng = std::mt19937_64{cfg.seed};
  auto verbs = draw_verb_rates(cfg, rng);
  return simulate_characters(painted, verbs, rng);
}

auto simulate_dataset(const SimConfig& cfg, const TimedTree& tree) -> CharacterMatrix {
  return simulate_dataset(cfg, PaintedTree::uniform(tree, Regime::N));
}

}  // namespace stemalt
