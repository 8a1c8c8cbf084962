#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stemalt/character_matrix.h"
#include "stemalt/ctmc.h"
#include "stemalt/regime.h"

namespace stemalt {

struct SimConfig {
  int num_verbs = 100;
  // Per-verb log-rates ~ Normal(mu, sigma), one draw per transition shared by
  // both regimes.
  double mu = 0.5;
  double sigma = 0.1;
  double death = 0.05;
  PatternState root_state = PatternState::ABC;
  std::uint64_t seed = 1;
  std::vector<double> hdi_levels{0.89, 0.95, 0.99};
  // Multiplier on the E-regime rates out of ABB; 1 means no regime effect.
  double e_abb_exit_multiplier = 1.0;

  auto validate() const -> void;
};

// Rate matrices of one simulated verb, indexed by regime, and its root state.
struct SimulatedVerb {
  std::array<RateMatrix, k_num_regimes> q;
  int root_state = 0;
};

// Runs every verb down the painted tree with simulate_path, switching matrix
// at regime boundaries, and records the tip states (DEAD stays DEAD).  Verbs
// are named v001, v002, ...
auto simulate_characters(const PaintedTree& painted, const std::vector<SimulatedVerb>& verbs, std::mt19937_64& rng)
    -> CharacterMatrix;

auto simulate_dataset(const SimConfig& cfg, const TimedTree& tree) -> CharacterMatrix;
auto simulate_dataset(const SimConfig& cfg, const PaintedTree& painted) -> CharacterMatrix;

// Per-verb rates as simulate_dataset draws them.
auto draw_verb_rates(const SimConfig& cfg, std::mt19937_64& rng) -> std::vector<SimulatedVerb>;

}  // namespace stemalt
