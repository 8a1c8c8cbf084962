#include "stemalt/ctmc.h"

#include <algorithm>
#include <cmath>

namespace stemalt {

namespace {

constexpr std::array<std::string_view, k_num_states> k_state_names = {"AAA", "AAB", "ABA", "ABB", "ABC", "DEAD"};

// Pade coefficients and 1-norm thresholds from Higham (2005).
constexpr double k_b3[] = {120., 60., 12., 1.};
constexpr double k_b5[] = {30240., 15120., 3360., 420., 30., 1.};
constexpr double k_b7[] = {17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.};
constexpr double k_b9[] = {17643225600., 8821612800., 2075673600., 302702400., 30270240.,
                           2162160.,     110880.,     3960.,       90.,        1.};
constexpr double k_b13[] = {64764752532480000., 32382376266240000., 7771770303897600., 1187353796428800.,
                            129060195264000.,   10559470521600.,    670442572800.,    33522128640.,
                            1323241920.,        40840800.,          960960.,          16380.,
                            182.,               1.};
constexpr double k_theta3 = 1.495585217958292e-2;
constexpr double k_theta5 = 2.539398330063230e-1;
constexpr double k_theta7 = 9.504178996162932e-1;
constexpr double k_theta9 = 2.097847961257068e0;
constexpr double k_theta13 = 5.371920351148152e0;

template <int N>
using Mat = Eigen::Matrix<double, N, N>;

template <int N>
auto one_norm(const Mat<N>& a) -> double {
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

template <int N, std::size_t M>
auto pade_low(const Mat<N>& a, const double (&b)[M]) -> Mat<N> {
  constexpr auto degree = static_cast<int>(M) - 1;
  const Mat<N> id = Mat<N>::Identity();
  const Mat<N> a2 = a * a;
  Mat<N> even = b[0] * id;
  Mat<N> odd = b[1] * id;
  Mat<N> power = id;
  for (auto k = 2; k <= degree; k += 2) {
    power = power * a2;
    even += b[k] * power;
    odd += b[k + 1] * power;
  }
  const Mat<N> u = a * odd;
  return (even - u).partialPivLu().solve(even + u);
}

template <int N>
auto pade13(const Mat<N>& a) -> Mat<N> {
  const auto& b = k_b13;
  const Mat<N> id = Mat<N>::Identity();
  const Mat<N> a2 = a * a;
  const Mat<N> a4 = a2 * a2;
  const Mat<N> a6 = a4 * a2;
  const Mat<N> u = a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
  const Mat<N> v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
  return (v - u).partialPivLu().solve(v + u);
}

}  // namespace

template <int N>
auto expm(const Eigen::Matrix<double, N, N>& a) -> Eigen::Matrix<double, N, N> {
  auto norm = one_norm<N>(a);
  if (!std::isfinite(norm)) throw Error{"expm: non-finite matrix"};
  if (norm <= k_theta3) return pade_low<N>(a, k_b3);
  if (norm <= k_theta5) return pade_low<N>(a, k_b5);
  if (norm <= k_theta7) return pade_low<N>(a, k_b7);
  if (norm <= k_theta9) return pade_low<N>(a, k_b9);
  auto s = std::max(0, static_cast<int>(std::ceil(std::log2(norm / k_theta13))));
  Mat<N> r = pade13<N>(a / std::ldexp(1.0, s));
  for (auto k = 0; k != s; ++k) r = r * r;
  return r;
}

template auto expm<2>(const Eigen::Matrix<double, 2, 2>&) -> Eigen::Matrix<double, 2, 2>;
template auto expm<5>(const Eigen::Matrix<double, 5, 5>&) -> Eigen::Matrix<double, 5, 5>;
template auto expm<6>(const Eigen::Matrix<double, 6, 6>&) -> Eigen::Matrix<double, 6, 6>;

auto state_name(PatternState s) -> std::string_view { return k_state_names[static_cast<int>(s)]; }
auto state_name(int s) -> std::string_view { return k_state_names.at(s); }

auto parse_state(std::string_view text) -> std::optional<PatternState> {
  for (auto i = 0; i != k_num_states; ++i) {
    if (k_state_names[i] == text) return static_cast<PatternState>(i);
  }
  return std::nullopt;
}

auto transition_name(int t) -> std::string {
  return std::string{state_name(transition_source(t))} + "->" + std::string{state_name(transition_target(t))};
}

auto RateMatrix::build(std::span<const double, k_num_transitions> living_rates, double death) -> RateMatrix {
  if (!std::isfinite(death) || death < 0.0) throw Error{"death rate must be finite and >= 0"};
  auto result = RateMatrix{};
  result.death_ = death;
  for (auto t = 0; t != k_num_transitions; ++t) {
    auto r = living_rates[t];
    if (!std::isfinite(r) || r < 0.0) throw Error{"transition rate " + transition_name(t) + " must be finite and >= 0"};
    result.q_(transition_source(t), transition_target(t)) = r;
  }
  for (auto i = 0; i != k_num_living; ++i) {
    result.q_(i, k_dead) = death;
    auto row = 0.0;
    for (auto j = 0; j != k_num_states; ++j) {
      if (j != i) row += result.q_(i, j);
    }
    result.q_(i, i) = -row;
  }
  return result;
}

auto RateMatrix::living_generator() const -> Matrix5 {
  Matrix5 g = q_.topLeftCorner<5, 5>();
  for (auto i = 0; i != k_num_living; ++i) g(i, i) += death_;
  return g;
}

auto transition_probabilities(const Matrix6& q, double t) -> Matrix6 {
  if (!(t >= 0.0)) throw Error{"transition_probabilities: time must be >= 0"};
  if (t == 0.0) return Matrix6::Identity();
  Matrix6 p = expm<6>(q * t);
  if (!p.allFinite()) throw Error{"transition_probabilities: overflow in matrix exponential"};
  return p.cwiseMax(0.0).cwiseMin(1.0);
}

auto transition_probabilities(const RateMatrix& q, double t) -> Matrix6 {
  return transition_probabilities(q.matrix(), t);
}

auto is_irreducible(const Matrix5& rates) -> bool {
  // Strong connectivity: every state reachable from 0, and 0 reachable from every state.
  auto reach = [&](bool forward) {
    auto seen = std::array<bool, k_num_living>{};
    auto stack = std::vector<int>{0};
    seen[0] = true;
    while (!stack.empty()) {
      auto i = stack.back();
      stack.pop_back();
      for (auto j = 0; j != k_num_living; ++j) {
        auto r = forward ? rates(i, j) : rates(j, i);
        if (j != i && !seen[j] && r > k_rate_floor) {
          seen[j] = true;
          stack.push_back(j);
        }
      }
    }
    return std::ranges::all_of(seen, [](bool b) { return b; });
  };
  return reach(true) && reach(false);
}

auto stationary_distribution(const RateMatrix& q) -> Vector5 {
  const Matrix5 g = q.living_generator();
  if (!is_irreducible(g)) throw ReducibleError{"stationary_distribution: living block is reducible"};
  // Solve pi G = 0 with sum(pi) = 1 by replacing one balance equation with
  // the normalization constraint.
  Matrix5 a = g.transpose();
  a.row(k_num_living - 1).setOnes();
  Vector5 rhs = Vector5::Zero();
  rhs(k_num_living - 1) = 1.0;
  Vector5 pi = a.fullPivLu().solve(rhs);
  if (!pi.allFinite()) throw ReducibleError{"stationary_distribution: singular system"};
  pi = pi.cwiseMax(0.0);
  return pi / pi.sum();
}

auto exit_rate(const RateMatrix& q, int i) -> double {
  if (i < 0 || i >= k_num_living) throw Error{"exit_rate: state must be living"};
  auto sum = 0.0;
  for (auto j = 0; j != k_num_living; ++j) {
    if (j != i) sum += q.rate(i, j);
  }
  return sum;
}

auto entry_rate(const RateMatrix& q, int i, const Vector5& stationary) -> double {
  if (i < 0 || i >= k_num_living) throw Error{"entry_rate: state must be living"};
  auto inflow = 0.0;
  auto mass = 0.0;
  for (auto j = 0; j != k_num_living; ++j) {
    if (j == i) continue;
    inflow += stationary(j) * q.rate(j, i);
    mass += stationary(j);
  }
  if (!(mass > 0.0)) throw Error{"entry_rate: no stationary mass outside the state"};
  return inflow / mass;
}

auto simulate_path(const RateMatrix& q, PatternState start, double duration, std::mt19937_64& rng)
    -> std::vector<PathSegment> {
  if (!(duration >= 0.0)) throw Error{"simulate_path: duration must be >= 0"};
  auto path = std::vector<PathSegment>{};
  auto state = static_cast<int>(start);
  auto remaining = duration;
  auto uniform = std::uniform_real_distribution<double>{0.0, 1.0};
  while (true) {
    auto total = -q.matrix()(state, state);
    if (state == k_dead || !(total > 0.0)) {
      path.push_back({static_cast<PatternState>(state), remaining});
      return path;
    }
    auto wait = std::exponential_distribution<double>{total}(rng);
    if (wait >= remaining) {
      path.push_back({static_cast<PatternState>(state), remaining});
      return path;
    }
    path.push_back({static_cast<PatternState>(state), wait});
    remaining -= wait;
    auto u = uniform(rng) * total;
    auto next = -1;
    for (auto j = 0; j != k_num_states; ++j) {
      if (j == state) continue;
      auto r = q.matrix()(state, j);
      if (r <= 0.0) continue;
      next = j;
      if (u < r) break;
      u -= r;
    }
    state = next;
  }
}

}  // namespace stemalt
