#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>

#include "oracles.h"
#include "stemalt/newick.h"
#include "stemalt/regime.h"

using namespace stemalt;

namespace {

auto obs_of(std::initializer_list<std::pair<const char*, Regime>> items) -> TamObservation {
  auto obs = TamObservation{};
  for (const auto& [k, v] : items) obs.by_taxon[k] = v;
  return obs;
}

auto mk_matrix(double a, double b, double t) -> Eigen::Matrix2d {
  Eigen::Matrix2d q;
  q << -a, a, b, -b;
  Eigen::Matrix2d qt = q * t;
  return qt.exp();
}

// P(E) at a point on the branch above `child`, by summing over the states of
// every internal node plus the inserted point.
auto enumerate_marginal(const TimedTree& tree, const TamObservation& obs, double a, double b, Node_index child,
                        double fraction) -> double {
  auto internal = std::vector<Node_index>{};
  for (auto n = 0; n != tree.size(); ++n) {
    if (!tree.is_tip(n) && n != tree.root()) internal.push_back(n);
  }
  auto state = std::vector<int>(tree.size(), 0);
  auto numer = 0.0;
  auto denom = 0.0;
  auto combos = 1 << (internal.size() + 1);
  for (auto c = 0; c != combos; ++c) {
    for (auto k = 0u; k != internal.size(); ++k) state[internal[k]] = (c >> k) & 1;
    auto point = (c >> internal.size()) & 1;
    state[tree.root()] = 0;
    for (auto t : tree.tips()) state[t] = obs.by_taxon.at(tree.at(t).label) == Regime::E ? 1 : 0;
    auto p = 1.0;
    for (auto n = 0; n != tree.size(); ++n) {
      if (n == tree.root()) continue;
      auto len = tree.at(n).length;
      auto from = state[tree.at(n).parent];
      if (n == child) {
        p *= mk_matrix(a, b, fraction * len)(from, point) * mk_matrix(a, b, (1 - fraction) * len)(point, state[n]);
      } else {
        p *= mk_matrix(a, b, len)(from, state[n]);
      }
    }
    denom += p;
    if (point == 1) numer += p;
  }
  return numer / denom;
}

auto check_painting_invariants(const PaintedTree& painted) -> void {
  const auto& tree = painted.tree();
  for (auto n = 0; n != tree.size(); ++n) {
    if (n == tree.root()) continue;
    auto sum = 0.0;
    const auto& segs = painted.segments(n);
    for (auto k = 0u; k != segs.size(); ++k) {
      CHECK(segs[k].length > 0.0);
      sum += segs[k].length;
      if (k > 0) CHECK(segs[k].regime != segs[k - 1].regime);
    }
    CHECK(std::abs(sum - tree.at(n).length) < 1e-9);
  }
}

auto simulate_tam(const TimedTree& tree, double a, double b, std::mt19937_64& rng) -> TamObservation {
  auto state = std::vector<int>(tree.size(), 0);
  auto obs = TamObservation{};
  for (auto n : tree.preorder()) {
    if (n == tree.root()) continue;
    auto p = mk_matrix(a, b, tree.at(n).length);
    auto from = state[tree.at(n).parent];
    state[n] = std::bernoulli_distribution{p(from, 1)}(rng) ? 1 : 0;
    if (tree.is_tip(n)) obs.by_taxon[tree.at(n).label] = state[n] ? Regime::E : Regime::N;
  }
  return obs;
}

}  // namespace

TEST_CASE("fit_binary_mk: all tips N sends N->E to the floor") {
  auto tree = parse_newick("((A:1,B:1):1,C:2):0;");
  auto fit = fit_binary_mk(tree, obs_of({{"A", Regime::N}, {"B", Regime::N}, {"C", Regime::N}}));
  CHECK(fit.n_to_e <= 1e-6);
  CHECK(fit.n_to_e >= k_mk_rate_floor);
  CHECK(fit.log_likelihood == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("fit_binary_mk: two tips, one E one N, against a grid search") {
  auto tree = parse_newick("(A:1,B:1):0;");
  auto obs = obs_of({{"A", Regime::E}, {"B", Regime::N}});
  auto fit = fit_binary_mk(tree, obs);
  CHECK(std::isfinite(fit.n_to_e));
  CHECK(std::isfinite(fit.e_to_n));
  auto best = -std::numeric_limits<double>::infinity();
  for (auto i = 0; i <= 200; ++i) {
    for (auto j = 0; j <= 200; ++j) {
      auto a = std::exp(-8.0 + 12.0 * i / 200.0);
      auto b = std::exp(-8.0 + 12.0 * j / 200.0);
      // Independent evaluation: root N, one branch ends E, the other N.
      auto ll = std::log(mk_matrix(a, b, 1.0)(0, 1)) + std::log(mk_matrix(a, b, 1.0)(0, 0));
      best = std::max(best, ll);
    }
  }
  CHECK(fit.log_likelihood >= best - 1e-6);
  CHECK(binary_mk_log_likelihood(tree, obs, fit.n_to_e, fit.e_to_n) ==
        doctest::Approx(fit.log_likelihood).epsilon(1e-12));
  // Swapping which tip carries E leaves the surface unchanged.
  auto swapped = obs_of({{"A", Regime::N}, {"B", Regime::E}});
  CHECK(binary_mk_log_likelihood(tree, swapped, 0.4, 0.9) ==
        doctest::Approx(binary_mk_log_likelihood(tree, obs, 0.4, 0.9)).epsilon(1e-14));
}

TEST_CASE("binary_mk_log_likelihood matches enumeration on random trees") {
  auto rng = std::mt19937_64{21};
  for (auto k = 0; k != 20; ++k) {
    auto tree = oracle::random_tree(rng, 5);
    auto obs = simulate_tam(tree, 0.7, 0.4, rng);
    auto internal = std::vector<Node_index>{};
    for (auto n = 0; n != tree.size(); ++n) {
      if (!tree.is_tip(n) && n != tree.root()) internal.push_back(n);
    }
    auto total = 0.0;
    for (auto c = 0; c != (1 << internal.size()); ++c) {
      auto state = std::vector<int>(tree.size(), 0);
      for (auto i = 0u; i != internal.size(); ++i) state[internal[i]] = (c >> i) & 1;
      for (auto t : tree.tips()) state[t] = obs.by_taxon.at(tree.at(t).label) == Regime::E;
      auto p = 1.0;
      for (auto n = 0; n != tree.size(); ++n) {
        if (n != tree.root()) p *= mk_matrix(0.7, 0.4, tree.at(n).length)(state[tree.at(n).parent], state[n]);
      }
      total += p;
    }
    CHECK(binary_mk_log_likelihood(tree, obs, 0.7, 0.4) == doctest::Approx(std::log(total)).epsilon(1e-12));
  }
}

TEST_CASE("fit_binary_mk: recovers simulated rates within a factor of two") {
  // One 50-tip binary character pins the rates down only loosely, so the
  // check is on the median over replicate data sets.  Every fit must also
  // beat the generating rates on its own data.
  auto rng = std::mt19937_64{2024};
  auto a = std::vector<double>{};
  auto b = std::vector<double>{};
  for (auto k = 0; k != 41; ++k) {
    auto tree = oracle::random_tree(rng, 50);
    auto obs = simulate_tam(tree, 0.5, 0.1, rng);
    auto fit = fit_binary_mk(tree, obs);
    CHECK(fit.log_likelihood >= binary_mk_log_likelihood(tree, obs, 0.5, 0.1) - 1e-9);
    a.push_back(fit.n_to_e);
    b.push_back(fit.e_to_n);
  }
  std::ranges::sort(a);
  std::ranges::sort(b);
  CHECK(a[20] > 0.25);
  CHECK(a[20] < 1.0);
  CHECK(b[20] > 0.05);
  CHECK(b[20] < 0.2);
}

TEST_CASE("marginals: root, observed tips and range") {
  auto tree = parse_newick("((A:1,B:1):1,C:2):0;");
  auto obs = obs_of({{"A", Regime::E}, {"B", Regime::N}, {"C", Regime::E}});
  auto rates = MkRates{0.6, 0.3, 0.0};
  auto m = RegimeMarginals{tree, obs, rates};
  CHECK(m.p_extended_at_node(tree.root()) == 0.0);
  CHECK(m.p_extended(tree.tip("A"), 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m.p_extended(tree.tip("B"), 1.0) == doctest::Approx(0.0));
  for (auto n = 0; n != tree.size(); ++n) {
    if (n == tree.root()) continue;
    for (auto f = 0.0; f <= 1.0; f += 0.05) {
      auto p = m.p_extended(n, f);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }
}

TEST_CASE("marginals: three-tip tree against enumeration") {
  auto tree = parse_newick("((A:0.7,B:1.2):0.5,C:1.4):0;");
  auto rates = MkRates{0.8, 0.35, 0.0};
  for (auto code = 0; code != 8; ++code) {
    auto obs = obs_of({{"A", (code & 1) ? Regime::E : Regime::N},
                       {"B", (code & 2) ? Regime::E : Regime::N},
                       {"C", (code & 4) ? Regime::E : Regime::N}});
    for (auto n = 0; n != tree.size(); ++n) {
      if (n == tree.root()) continue;
      for (auto f : {0.0, 0.1, 0.5, 0.77, 1.0}) {
        auto expected = enumerate_marginal(tree, obs, rates.n_to_e, rates.e_to_n, n, f);
        CHECK(marginal_regime_probability(tree, obs, rates, n, f) == doctest::Approx(expected).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("paint_regimes: all N paints the whole tree N") {
  auto tree = parse_newick("((A:1,B:1):1,C:2):0;");
  auto obs = obs_of({{"A", Regime::N}, {"B", Regime::N}, {"C", Regime::N}});
  auto painted = paint_regimes(tree, fit_binary_mk(tree, obs), obs);
  CHECK(painted.regime_length(Regime::E) == 0.0);
  CHECK(painted.regime_length(Regime::N) == doctest::Approx(tree.total_length()));
  check_painting_invariants(painted);
}

TEST_CASE("paint_regimes: an E tip below an N root switches exactly once") {
  auto tree = parse_newick("(A:1,B:1):0;");
  auto obs = obs_of({{"A", Regime::E}, {"B", Regime::N}});
  auto painted = paint_regimes(tree, MkRates{0.5, 0.2, 0.0}, obs);
  const auto& segs = painted.segments(tree.tip("A"));
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].regime == Regime::N);
  CHECK(segs[1].regime == Regime::E);
  // The switch sits where the interpolated P(E) crosses one half.
  auto at = segs[0].length / tree.at(tree.tip("A")).length;
  auto m = RegimeMarginals{tree, obs, MkRates{0.5, 0.2, 0.0}};
  CHECK(m.p_extended(tree.tip("A"), at) == doctest::Approx(0.5).epsilon(0.01));
  CHECK(painted.segments(tree.tip("B")).size() == 1);
  check_painting_invariants(painted);
}

TEST_CASE("paint_regimes: reversals allowed by default, suppressed with sticky E") {
  auto tree = parse_newick("(((A:0.2,B:0.2,C:3):2,D:2.2):0.1,F:2.3):0;");
  auto obs = obs_of({{"A", Regime::E}, {"B", Regime::E}, {"C", Regime::N}, {"D", Regime::E}, {"F", Regime::N}});
  auto rates = MkRates{0.5, 0.5, 0.0};
  auto plain = paint_regimes(tree, rates, obs);
  check_painting_invariants(plain);
  const auto& c = plain.segments(tree.tip("C"));
  REQUIRE(c.size() >= 2);
  CHECK(c.front().regime == Regime::E);
  CHECK(c.back().regime == Regime::N);

  auto options = PaintOptions{};
  options.sticky_e = true;
  auto sticky = paint_regimes(tree, rates, obs, options);
  check_painting_invariants(sticky);
  const auto& cs = sticky.segments(tree.tip("C"));
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].regime == Regime::E);
  CHECK(sticky.regime_length(Regime::E) > plain.regime_length(Regime::E));
}

TEST_CASE("paint_regimes: deterministic and convergent under grid refinement") {
  auto rng = std::mt19937_64{31};
  for (auto k = 0; k != 5; ++k) {
    auto tree = oracle::random_tree(rng, 20);
    auto obs = simulate_tam(tree, 0.4, 0.2, rng);
    auto rates = fit_binary_mk(tree, obs);
    auto a = paint_regimes(tree, rates, obs);
    auto b = paint_regimes(tree, rates, obs);
    CHECK(write_painted_newick(a) == write_painted_newick(b));
    auto options = PaintOptions{};
    options.grid_points_per_branch = 200;
    auto fine = paint_regimes(tree, rates, obs, options);
    auto coarse_e = a.regime_length(Regime::E);
    auto fine_e = fine.regime_length(Regime::E);
    CHECK(std::abs(fine_e - coarse_e) <= 0.01 * std::max(fine_e, 1e-9) + 1e-12);
  }
}

TEST_CASE("paint_regimes: errors") {
  auto tree = parse_newick("(A:1,B:1):0;");
  auto obs = obs_of({{"A", Regime::E}});
  CHECK_THROWS_WITH_AS(paint_regimes(tree, MkRates{0.5, 0.5, 0.0}, obs), doctest::Contains("'B'"), Error);
  auto full = obs_of({{"A", Regime::E}, {"B", Regime::N}});
  auto options = PaintOptions{};
  options.grid_points_per_branch = 1;
  CHECK_THROWS_AS(paint_regimes(tree, MkRates{0.5, 0.5, 0.0}, full, options), Error);
}

TEST_CASE("PaintedTree: invariants enforced") {
  auto tree = parse_newick("(A:1,B:1):0;");
  auto segs = std::vector<std::vector<RegimeSegment>>(tree.size());
  segs[tree.tip("A")] = {{0.5, Regime::N}, {0.5, Regime::E}};
  segs[tree.tip("B")] = {{1.0, Regime::N}};
  CHECK_NOTHROW(PaintedTree(tree, segs));
  auto short_sum = segs;
  short_sum[tree.tip("B")] = {{0.9, Regime::N}};
  CHECK_THROWS_AS(PaintedTree(tree, short_sum), Error);
  auto repeated = segs;
  repeated[tree.tip("A")] = {{0.5, Regime::N}, {0.5, Regime::N}};
  CHECK_THROWS_AS(PaintedTree(tree, repeated), Error);
  auto zero = segs;
  zero[tree.tip("A")] = {{0.0, Regime::N}, {1.0, Regime::E}};
  CHECK_THROWS_AS(PaintedTree(tree, zero), Error);
  CHECK(PaintedTree(tree, segs).regime_at(tree.tip("A")) == Regime::E);
  CHECK(PaintedTree(tree, segs).regime_at(tree.root()) == Regime::N);
}

TEST_CASE("painted Newick round trip") {
  auto rng = std::mt19937_64{41};
  for (auto k = 0; k != 20; ++k) {
    auto tree = oracle::random_tree(rng, 10);
    auto painted = oracle::random_painting(rng, tree);
    auto again = parse_painted_newick(write_painted_newick(painted));
    REQUIRE(again.tree().size() == painted.tree().size());
    CHECK(again.regime_length(Regime::E) == doctest::Approx(painted.regime_length(Regime::E)).epsilon(1e-12));
    for (auto t : painted.tree().tips()) {
      auto label = painted.tree().at(t).label;
      const auto& a = painted.segments(t);
      const auto& b = again.segments(again.tree().tip(label));
      REQUIRE(a.size() == b.size());
      for (auto i = 0u; i != a.size(); ++i) {
        CHECK(a[i].regime == b[i].regime);
        CHECK(a[i].length == doctest::Approx(b[i].length).epsilon(1e-12));
      }
    }
  }
  CHECK(parse_painted_newick("(A:1[&regime=N:0.4,E:0.6],B:1[&regime=N:1]):0;").regime_length(Regime::E) ==
        doctest::Approx(0.6));
}

TEST_CASE("read_tam_csv: header, states and errors") {
  auto path = std::string{"/tmp/stemalt_test_tam.csv"};
  {
    auto out = std::ofstream{path};
    out << "taxon,state\nA,E\nB,N\n";
  }
  auto obs = read_tam_csv(path);
  CHECK(obs.by_taxon.at("A") == Regime::E);
  CHECK(obs.by_taxon.at("B") == Regime::N);
  {
    auto out = std::ofstream{path};
    out << "taxon,state\nA,X\n";
  }
  CHECK_THROWS_AS(read_tam_csv(path), Error);
  std::remove(path.c_str());
}
