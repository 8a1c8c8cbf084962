#include <doctest.h>

#include <functional>
#include <numbers>
#include <random>

#include "oracles.h"
#include "stemalt/model.h"
#include "stemalt/newick.h"

using namespace stemalt;

namespace {

// Textbook densities, written out independently of the library.
auto normal_pdf(double x, double m, double s) -> double {
  return std::exp(-0.5 * (x - m) * (x - m) / (s * s)) / (s * std::sqrt(2 * std::numbers::pi));
}
auto lognormal_pdf(double x, double m, double s) -> double {
  return std::exp(-0.5 * (std::log(x) - m) * (std::log(x) - m) / (s * s)) / (x * s * std::sqrt(2 * std::numbers::pi));
}
auto half_normal_pdf(double x) -> double { return 2 * normal_pdf(x, 0, 1); }

auto random_params(std::mt19937_64& rng, ModelKind kind, int verbs) -> ModelParams {
  auto u = std::uniform_real_distribution<double>{-1.5, 1.5};
  auto values = std::vector<double>(parameter_count(kind, verbs));
  for (auto& x : values) x = u(rng);
  return ModelParams::from_vector(kind, verbs, values);
}

auto small_data(std::mt19937_64& rng, const TimedTree& tree, int verbs) -> CharacterMatrix {
  auto state = std::uniform_int_distribution<int>{0, k_num_living - 1};
  auto names = std::vector<std::string>{};
  auto cells = std::vector<std::vector<int>>{};
  for (auto v = 0; v != verbs; ++v) {
    names.push_back("v" + std::to_string(v));
    auto row = std::vector<int>{};
    for (auto k = 0u; k != tree.tips().size(); ++k) row.push_back(state(rng));
    cells.push_back(row);
  }
  return CharacterMatrix{names, tree.tip_labels(), cells};
}

auto golden_max(const std::function<double(double)>& f, double lo, double hi) -> double {
  const auto g = (std::sqrt(5.0) - 1) / 2;
  auto a = lo;
  auto b = hi;
  for (auto k = 0; k != 120; ++k) {
    auto c = b - g * (b - a);
    auto d = a + g * (b - a);
    if (f(c) > f(d)) {
      b = d;
    } else {
      a = c;
    }
  }
  return (a + b) / 2;
}

}  // namespace

TEST_CASE("parameter counts") {
  CHECK(parameter_count(ModelKind::flat, 107) == 41);
  CHECK(parameter_count(ModelKind::hierarchical, 107) == 41 + 40 + 107 * 40);
  CHECK(parameter_count(ModelKind::ancestry_constrained, 5) == 41 + 40 + 5 * 40);
  CHECK(parameter_names(ModelKind::flat, {"a", "b"}).size() == 41u);
  CHECK(parameter_names(ModelKind::hierarchical, {"a", "b"}).size() == 41u + 40u + 80u);
  CHECK(parameter_names(ModelKind::flat, {})[0] == "log_delta");
  CHECK(parameter_names(ModelKind::flat, {})[1 + 20 + transition_index(3, 0)] == "mu[E][ABB->AAA]");
}

TEST_CASE("parameter vector round trip") {
  auto rng = std::mt19937_64{1};
  for (auto kind : {ModelKind::flat, ModelKind::hierarchical}) {
    auto p = random_params(rng, kind, 3);
    auto q = ModelParams::from_vector(kind, 3, p.to_vector());
    CHECK(q.to_vector() == p.to_vector());
  }
  CHECK_THROWS_AS(ModelParams::from_vector(ModelKind::flat, 0, std::vector<double>(40)), Error);
}

TEST_CASE("log_prior: maximal at the modes and decreasing away from them") {
  auto p = ModelParams::zeros(ModelKind::flat, 0);
  auto at_mode = log_prior(p);
  CHECK(std::isfinite(at_mode));
  for (auto r = 0; r != k_num_regimes; ++r) {
    for (auto t = 0; t < k_num_transitions; t += 7) {
      auto previous = at_mode;
      for (auto x = 0.5; x <= 5.0; x += 0.5) {
        auto up = p;
        up.mu[r][t] = x;
        auto down = p;
        down.mu[r][t] = -x;
        CHECK(log_prior(up) < previous);
        CHECK(log_prior(down) == doctest::Approx(log_prior(up)).epsilon(1e-15));
        previous = log_prior(up);
      }
    }
  }
}

TEST_CASE("log_prior: one verb with rho = mu gives the log-normal density at its median") {
  auto p = ModelParams::zeros(ModelKind::hierarchical, 1);
  p.mu[1][5] = 0.7;
  p.log_sigma[1][5] = std::log(0.4);
  p.log_rho[0] = p.mu;
  auto terms = prior_terms(p);
  auto expected = 0.0;
  for (auto r = 0; r != k_num_regimes; ++r) {
    for (auto t = 0; t != k_num_transitions; ++t) {
      auto m = std::exp(p.mu[r][t]);
      auto s = std::exp(p.log_sigma[r][t]);
      expected += std::log(1.0 / (m * s * std::sqrt(2 * std::numbers::pi)));
    }
  }
  CHECK(terms.verb_rates == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("log_prior: matches direct formula recomputation") {
  auto rng = std::mt19937_64{2};
  for (auto k = 0; k != 20; ++k) {
    auto p = random_params(rng, ModelKind::hierarchical, 3);
    auto terms = prior_terms(p);
    auto delta = std::exp(p.log_delta);
    CHECK(terms.delta == doctest::Approx(std::log(lognormal_pdf(delta, 0, 1))).epsilon(1e-12));
    auto mu = 0.0;
    auto sigma = 0.0;
    auto verbs = 0.0;
    auto jac = std::log(delta);
    for (auto r = 0; r != k_num_regimes; ++r) {
      for (auto t = 0; t != k_num_transitions; ++t) {
        mu += std::log(normal_pdf(p.mu[r][t], 0, 1));
        auto s = std::exp(p.log_sigma[r][t]);
        sigma += std::log(half_normal_pdf(s));
        jac += std::log(s);
        for (const auto& v : p.log_rho) {
          auto rate = std::exp(v[r][t]);
          verbs += std::log(lognormal_pdf(rate, p.mu[r][t], s));
          jac += std::log(rate);
        }
      }
    }
    CHECK(terms.mu == doctest::Approx(mu).epsilon(1e-12));
    CHECK(terms.sigma == doctest::Approx(sigma).epsilon(1e-12));
    CHECK(terms.verb_rates == doctest::Approx(verbs).epsilon(1e-12));
    CHECK(terms.jacobian == doctest::Approx(jac).epsilon(1e-12));
    CHECK(log_prior(p) == doctest::Approx(mu + sigma + verbs + jac + terms.delta).epsilon(1e-12));
  }
  auto flat = random_params(rng, ModelKind::flat, 0);
  CHECK(prior_terms(flat).verb_rates == 0.0);
  CHECK(prior_terms(flat).sigma == 0.0);
}

TEST_CASE("log_posterior: no verbs gives the prior") {
  auto rng = std::mt19937_64{3};
  auto tree = parse_newick("(A:1,B:1):0;");
  auto data = CharacterMatrix{{}, {"A", "B"}, {}};
  auto p = random_params(rng, ModelKind::flat, 0);
  CHECK(log_posterior(p, data, PaintedTree::uniform(tree, Regime::N)) == doctest::Approx(log_prior(p)));
}

TEST_CASE("log_posterior: flat and hierarchical agree when every rho equals mu") {
  auto rng = std::mt19937_64{4};
  auto tree = oracle::random_tree(rng, 6);
  auto painted = oracle::random_painting(rng, tree);
  auto data = small_data(rng, tree, 4);
  auto flat = random_params(rng, ModelKind::flat, 4);
  auto hier = ModelParams::zeros(ModelKind::hierarchical, 4);
  hier.log_delta = flat.log_delta;
  hier.mu = flat.mu;
  for (auto& v : hier.log_rho) v = flat.mu;
  auto a = pointwise_loglik(flat, data, painted);
  auto b = pointwise_loglik(hier, data, painted);
  REQUIRE(a.size() == 4u);
  for (auto v = 0; v != 4; ++v) CHECK(a[v] == doctest::Approx(b[v]).epsilon(1e-12));
}

TEST_CASE("log_posterior: additive in prior and pointwise terms") {
  auto rng = std::mt19937_64{5};
  auto tree = oracle::random_tree(rng, 6);
  auto painted = oracle::random_painting(rng, tree);
  auto data = small_data(rng, tree, 3);
  auto model = PosteriorModel{ModelKind::hierarchical, data, painted, RootPrior::uniform_all};
  auto a = random_params(rng, ModelKind::hierarchical, 3);
  auto b = random_params(rng, ModelKind::hierarchical, 3);
  auto sum = [&](const ModelParams& p) {
    auto s = log_prior(p);
    for (auto ll : model.pointwise_loglik(p)) s += ll;
    return s;
  };
  CHECK(model.log_posterior(a) - model.log_posterior(b) == doctest::Approx(sum(a) - sum(b)).epsilon(1e-8));
  CHECK(std::isfinite(model.log_posterior(a)));
}

TEST_CASE("pointwise_loglik: single verb equals prune_verb; identical verbs agree; reproducible") {
  auto rng = std::mt19937_64{6};
  auto tree = oracle::random_tree(rng, 7);
  auto painted = oracle::random_painting(rng, tree);
  auto data = small_data(rng, tree, 1);
  auto p = random_params(rng, ModelKind::hierarchical, 1);
  auto ll = pointwise_loglik(p, data, painted);
  REQUIRE(ll.size() == 1u);
  auto direct = prune_verb(painted, verb_rate_matrix(p, 0, Regime::E), verb_rate_matrix(p, 0, Regime::N),
                           tip_likelihoods(data, 0), root_prior_vector(RootPrior::uniform_all));
  CHECK(ll[0] == doctest::Approx(direct).epsilon(1e-12));

  auto twice = CharacterMatrix{{"a", "b"}, data.taxa(), {data.row(0), data.row(0)}};
  auto flat = random_params(rng, ModelKind::flat, 2);
  auto pair = pointwise_loglik(flat, twice, painted);
  CHECK(pair[0] == pair[1]);
  CHECK(pointwise_loglik(flat, twice, painted) == pair);
}

TEST_CASE("log_posterior: dimension mismatch is an error") {
  auto rng = std::mt19937_64{7};
  auto tree = oracle::random_tree(rng, 4);
  auto data = small_data(rng, tree, 2);
  auto p = random_params(rng, ModelKind::hierarchical, 3);
  CHECK_THROWS_AS(log_posterior(p, data, PaintedTree::uniform(tree, Regime::N)), Error);
}

TEST_CASE("hierarchical shrinkage: tiny sigma pins verb rates to exp(mu)") {
  auto rng = std::mt19937_64{8};
  auto tree = oracle::random_tree(rng, 5);
  auto painted = oracle::random_painting(rng, tree);
  auto data = small_data(rng, tree, 1);
  auto model = PosteriorModel{ModelKind::hierarchical, data, painted, RootPrior::uniform_all};
  auto p = random_params(rng, ModelKind::hierarchical, 1);
  for (auto& r : p.log_sigma) r.fill(std::log(1e-6));
  for (auto sweep = 0; sweep != 2; ++sweep) {
    for (auto r = 0; r != k_num_regimes; ++r) {
      for (auto t = 0; t != k_num_transitions; ++t) {
        auto f = [&](double x) {
          auto q = p;
          q.log_rho[0][r][t] = x;
          return model.log_posterior(q);
        };
        p.log_rho[0][r][t] = golden_max(f, -6.0, 6.0);
      }
    }
  }
  for (auto r = 0; r != k_num_regimes; ++r) {
    for (auto t = 0; t != k_num_transitions; ++t) {
      CHECK(std::exp(p.log_rho[0][r][t]) == doctest::Approx(std::exp(p.mu[r][t])).epsilon(1e-6));
    }
  }
}

TEST_CASE("constrain_root") {
  auto rng = std::mt19937_64{9};
  auto tree = oracle::random_tree(rng, 6);
  auto painted = oracle::random_painting(rng, tree);
  auto data = small_data(rng, tree, 1);
  auto p = random_params(rng, ModelKind::flat, 1);
  auto prior = root_prior_vector(RootPrior::uniform_all);
  auto unconstrained = PosteriorModel{ModelKind::flat, data, painted, RootPrior::uniform_all};
  auto ll_free = unconstrained.pointwise_loglik(p)[0];

  // Root posterior without the constraint, for choosing states below.
  auto q_e = expected_rate_matrix(p, Regime::E);
  auto q_n = expected_rate_matrix(p, Regime::N);
  auto matrices = SegmentMatrices{};
  fill_segment_matrices(unconstrained.plan(), {&q_n, &q_e}, matrices);
  auto scale = 0.0;
  Vector6 post = prior.cwiseProduct(plan_root_partials(unconstrained.plan(), matrices, unconstrained.tips(0), scale));
  post /= post.sum();
  int modal = 0;
  post.maxCoeff(&modal);

  auto constrained_ll = [&](int state, double eps) {
    auto roots = RootStates{{"v0"}, {state}};
    auto problem = constrain_root(painted, data, roots, eps);
    auto model = PosteriorModel{ModelKind::ancestry_constrained, problem.data, problem.painted, RootPrior::uniform_all};
    auto hp = ModelParams::zeros(ModelKind::ancestry_constrained, 1);
    hp.log_delta = p.log_delta;
    hp.mu = p.mu;
    hp.log_rho[0] = p.mu;
    return model.pointwise_loglik(hp)[0];
  };

  SUBCASE("anchor branch layout") {
    auto problem = constrain_root(painted, data, RootStates{{"v0"}, {modal}}, 1e-6);
    auto anchor = problem.painted.tree().tip(std::string{k_root_anchor_taxon});
    CHECK(problem.painted.tree().at(anchor).parent == problem.painted.tree().root());
    CHECK(problem.painted.tree().at(anchor).length == doctest::Approx(1e-6 * tree.height()));
    CHECK(problem.painted.segments(anchor).front().regime == Regime::N);
    CHECK(problem.data.cell(0, problem.data.taxon_index(k_root_anchor_taxon)) == modal);
  }
  SUBCASE("small epsilon concentrates the root on the constrained state") {
    // log L_c - log L = log P(root = s | data) in the limit.
    for (auto s = 0; s != k_num_living; ++s) {
      if (post(s) < 1e-6) continue;
      CHECK(constrained_ll(s, 1e-8) - ll_free == doctest::Approx(std::log(post(s))).epsilon(1e-5));
    }
  }
  SUBCASE("modal constraint costs less than the prior probability") {
    CHECK(std::abs(constrained_ll(modal, 1e-6) - ll_free) < std::log(6.0));
  }
  SUBCASE("constraint to an impossible root: large but finite penalty") {
    auto dead = constrained_ll(k_dead, 1e-6);
    CHECK(std::isfinite(dead));
    CHECK(dead - ll_free < -10.0);
  }
  SUBCASE("insensitive to epsilon between 1e-8 and 1e-4") {
    auto a = constrained_ll(modal, 1e-4);
    auto b = constrained_ll(modal, 1e-6);
    auto c = constrained_ll(modal, 1e-8);
    CHECK(std::abs(a - b) < 1e-2);
    CHECK(std::abs(b - c) < 1e-4);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(constrain_root(painted, data, RootStates{{"other"}, {0}}, 1e-6), Error);
    CHECK_THROWS_AS(constrain_root(painted, data, RootStates{{"v0"}, {0}}, 0.0), Error);
  }
}
