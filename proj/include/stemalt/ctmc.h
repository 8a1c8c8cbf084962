#pragma once

#include <array>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "stemalt/tree.h"

namespace stemalt {

// Stem-vowel alternation pattern across infinitive, past and past participle.
// DEAD is absorbing.  The enumerator values are the canonical state indices.
enum class PatternState : int { AAA = 0, AAB, ABA, ABB, ABC, DEAD };

inline constexpr int k_num_states = 6;
inline constexpr int k_num_living = 5;
inline constexpr int k_num_transitions = k_num_living * (k_num_living - 1);  // 20
inline constexpr int k_dead = static_cast<int>(PatternState::DEAD);

using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix5 = Eigen::Matrix<double, 5, 5>;
using Vector5 = Eigen::Matrix<double, 5, 1>;
using LivingRates = std::array<double, k_num_transitions>;

auto state_name(PatternState s) -> std::string_view;
auto state_name(int s) -> std::string_view;
auto parse_state(std::string_view text) -> std::optional<PatternState>;

// Index of the living transition from -> to (from != to) in [0, 20).  Ordered by
// source state, then by target state skipping the diagonal.
constexpr auto transition_index(int from, int to) -> int { return from * 4 + (to < from ? to : to - 1); }
constexpr auto transition_source(int t) -> int { return t / 4; }
constexpr auto transition_target(int t) -> int {
  auto from = t / 4;
  auto k = t % 4;
  return k < from ? k : k + 1;
}
auto transition_name(int t) -> std::string;  // e.g. "ABB->AAA"

// 6x6 generator over the five living patterns plus DEAD.  Living rows carry
// the 20 between-pattern rates and a common death rate; the DEAD row is zero.
class RateMatrix {
 public:
  RateMatrix() : q_{Matrix6::Zero()} {}

  // Throws Error on negative or non-finite input.
  static auto build(std::span<const double, k_num_transitions> living_rates, double death) -> RateMatrix;

  auto matrix() const -> const Matrix6& { return q_; }
  auto rate(int from, int to) const -> double { return q_(from, to); }
  auto death_rate() const -> double { return death_; }
  // Living 5x5 block with the diagonal re-balanced so rows sum to zero
  // (i.e. the chain conditioned on survival).
  auto living_generator() const -> Matrix5;

 private:
  Matrix6 q_;
  double death_ = 0.0;
};

// Matrix exponential by scaling and squaring with a diagonal Pade approximant
// whose degree is chosen from the 1-norm.
template <int N>
auto expm(const Eigen::Matrix<double, N, N>& a) -> Eigen::Matrix<double, N, N>;

// exp(Q t), entries clamped into [0, 1].  Throws Error for t < 0 or non-finite
// results.
auto transition_probabilities(const RateMatrix& q, double t) -> Matrix6;
auto transition_probabilities(const Matrix6& q, double t) -> Matrix6;

class ReducibleError : public Error {
 public:
  using Error::Error;
};

// Rates below this are treated as absent when testing irreducibility.
inline constexpr double k_rate_floor = 1e-12;

auto is_irreducible(const Matrix5& rates) -> bool;

// Quasi-stationary distribution over the living patterns: the left null
// vector of the living block.  DEAD is excluded because death is state
// independent, so conditioning on survival leaves the living dynamics intact.
// Throws ReducibleError if the living block is not irreducible.
auto stationary_distribution(const RateMatrix& q) -> Vector5;

// Total rate of leaving living state i for another living state.
auto exit_rate(const RateMatrix& q, int i) -> double;
// Stationary-weighted rate of arriving in living state i from the others.
auto entry_rate(const RateMatrix& q, int i, const Vector5& stationary) -> double;

struct PathSegment {
  PatternState state;
  double dwell;
};

// Gillespie simulation of one lineage for `duration` time units.
auto simulate_path(const RateMatrix& q, PatternState start, double duration, std::mt19937_64& rng)
    -> std::vector<PathSegment>;

}  // namespace stemalt
