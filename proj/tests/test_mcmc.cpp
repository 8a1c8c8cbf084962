#include <doctest.h>

#include <algorithm>
#include <numbers>
#include <numeric>
#include <random>

#include "oracles.h"
#include "stemalt/diagnostics.h"
#include "stemalt/mcmc.h"
#include "stemalt/newick.h"

using namespace stemalt;

namespace {

auto mean_of(const Eigen::VectorXd& x) -> double { return x.mean(); }

auto sd_of(const Eigen::VectorXd& x) -> double {
  auto m = x.mean();
  return std::sqrt((x.array() - m).square().sum() / static_cast<double>(x.size() - 1));
}

// Monte Carlo standard error of a mean by batch means.
auto batch_se(const Eigen::VectorXd& x, int batches = 50) -> double {
  auto size = x.size() / batches;
  auto means = Eigen::VectorXd(batches);
  for (auto b = 0; b != batches; ++b) means(b) = x.segment(b * size, size).mean();
  return sd_of(means) / std::sqrt(static_cast<double>(batches));
}

auto all_missing(int verbs, const std::vector<std::string>& taxa) -> CharacterMatrix {
  auto names = std::vector<std::string>{};
  auto cells = std::vector<std::vector<int>>{};
  for (auto v = 0; v != verbs; ++v) {
    names.push_back("v" + std::to_string(v));
    auto row = std::vector<int>(taxa.size(), k_missing);
    row[0] = 0;  // one observed cell per verb; a lone tip carries no rate information
    cells.push_back(row);
  }
  return CharacterMatrix{names, taxa, cells};
}

auto two_tip() -> PaintedTree { return PaintedTree::uniform(parse_newick("(A:1,B:1):0;"), Regime::N); }

}  // namespace

TEST_CASE("random-walk Metropolis on a standard normal") {
  auto rng = std::mt19937_64{1};
  auto draws = random_walk_metropolis([](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); },
                                      Eigen::VectorXd::Constant(1, 3.0), 12000, 2000, 0.44, rng);
  REQUIRE(draws.rows() == 10000);
  CHECK(std::abs(mean_of(draws.col(0))) < 0.05);
  CHECK(sd_of(draws.col(0)) == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("two free rates on a 2-tip tree against grid integration") {
  auto tree = two_tip();
  auto data = CharacterMatrix{{"v"}, {"A", "B"}, {{0, 1}}};
  auto model = PosteriorModel{ModelKind::flat, data, tree, RootPrior::uniform_all};
  auto base = ModelParams::zeros(ModelKind::flat, 1);
  base.log_delta = -3.0;
  for (auto& r : base.mu) r.fill(-3.0);
  const auto ia = transition_index(0, 1);
  const auto ib = transition_index(1, 0);
  // Only the two free coordinates are varied; the fixed ones contribute a
  // constant to the log density.
  auto log_density = [&](double a, double b) {
    auto p = base;
    p.mu[0][ia] = a;
    p.mu[0][ib] = b;
    return model.log_posterior(p);
  };

  auto grid = 301;
  auto lo = -7.0;
  auto hi = 5.0;
  auto h = (hi - lo) / (grid - 1);
  auto logs = Eigen::MatrixXd(grid, grid);
  for (auto i = 0; i != grid; ++i) {
    for (auto j = 0; j != grid; ++j) logs(i, j) = log_density(lo + i * h, lo + j * h);
  }
  auto peak = logs.maxCoeff();
  auto z = 0.0;
  auto ea = 0.0;
  auto eb = 0.0;
  for (auto i = 0; i != grid; ++i) {
    for (auto j = 0; j != grid; ++j) {
      auto w = std::exp(logs(i, j) - peak);
      z += w;
      ea += w * std::exp(lo + i * h);
      eb += w * std::exp(lo + j * h);
    }
  }
  ea /= z;
  eb /= z;

  auto rng = std::mt19937_64{2};
  auto draws = random_walk_metropolis([&](const Eigen::VectorXd& x) { return log_density(x(0), x(1)); },
                                      Eigen::VectorXd::Zero(2), 42000, 2000, 0.44, rng);
  Eigen::VectorXd ra = draws.col(0).array().exp();
  Eigen::VectorXd rb = draws.col(1).array().exp();
  CHECK(std::abs(ra.mean() - ea) < 4 * batch_se(ra));
  CHECK(std::abs(rb.mean() - eb) < 4 * batch_se(rb));
}

TEST_CASE("sample: uninformative data return the flat prior") {
  auto cfg = SamplerConfig{};
  cfg.iterations = 6000;
  cfg.warmup = 1000;
  cfg.chains = 2;
  cfg.seed = 3;
  auto data = all_missing(1, {"A", "B"});
  auto pool = sample(ModelKind::flat, data, {two_tip()}, cfg);
  REQUIRE(pool.num_draws() == 10000);
  // Average over all 41 coordinates: each is N(0, 1) a priori.
  auto means = 0.0;
  auto sds = 0.0;
  for (auto c = 0; c != pool.draws.cols(); ++c) {
    means += pool.draws.col(c).mean();
    sds += sd_of(pool.draws.col(c));
  }
  CHECK(std::abs(means / 41) < 0.05);
  CHECK(sds / 41 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("sample: uninformative data return the hierarchical prior") {
  auto cfg = SamplerConfig{};
  cfg.iterations = 8000;
  cfg.warmup = 2000;
  cfg.chains = 2;
  cfg.seed = 4;
  auto data = all_missing(2, {"A", "B"});
  auto pool = sample(ModelKind::hierarchical, data, {two_tip()}, cfg);
  auto mu_mean = 0.0;
  auto mu_sd = 0.0;
  auto sigma_mean = 0.0;
  auto rho_var = 0.0;
  for (auto r = 0; r != k_num_regimes; ++r) {
    for (auto t = 0; t != k_num_transitions; ++t) {
      auto mu = pool.draws.col(1 + r * 20 + t);
      auto sigma = pool.draws.col(41 + r * 20 + t).array().exp().matrix();
      auto rho = pool.draws.col(81 + r * 20 + t);
      mu_mean += mu.mean();
      mu_sd += sd_of(mu);
      sigma_mean += sigma.mean();
      rho_var += sd_of(rho) * sd_of(rho);
    }
  }
  CHECK(std::abs(mu_mean / 40) < 0.07);
  CHECK(mu_sd / 40 == doctest::Approx(1.0).epsilon(0.07));
  // sigma ~ HalfNormal(1): mean sqrt(2 / pi).  Marginally, log rho has
  // variance 1 + E[sigma^2] = 2.
  CHECK(sigma_mean / 40 == doctest::Approx(std::sqrt(2 / std::numbers::pi)).epsilon(0.07));
  CHECK(rho_var / 40 == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("sample: pooling, provenance, stored log posterior and determinism") {
  auto rng = std::mt19937_64{5};
  auto trees = std::vector<PaintedTree>{};
  for (auto k = 0; k != 2; ++k) trees.push_back(oracle::random_painting(rng, oracle::random_tree(rng, 5)));
  // Both trees need the same tip set.
  auto taxa = trees[0].tree().tip_labels();
  auto cells = std::vector<std::vector<int>>{{0, 3, 3, 1, k_missing}, {4, 4, 0, k_dead, 2}, {0, 0, 0, 0, 1}};
  auto data = CharacterMatrix{{"a", "b", "c"}, taxa, cells};
  auto cfg = SamplerConfig{};
  cfg.iterations = 300;
  cfg.warmup = 100;
  cfg.chains = 3;
  cfg.seed = 77;
  cfg.threads = 2;
  for (auto kind : {ModelKind::flat, ModelKind::hierarchical}) {
    auto pool = sample(kind, data, trees, cfg);
    REQUIRE(pool.num_draws() == 2 * 3 * 200);
    CHECK(pool.draws.cols() == parameter_count(kind, 3));
    CHECK(pool.pointwise.rows() == pool.num_draws());
    CHECK(pool.pointwise.cols() == 3);
    CHECK(pool.param_names.size() == static_cast<std::size_t>(pool.draws.cols()));
    for (auto t = 0; t != 2; ++t) {
      auto n = std::count_if(pool.provenance.begin(), pool.provenance.end(), [&](auto& p) { return p.tree == t; });
      CHECK(n == 600);
    }
    auto models = std::vector<PosteriorModel>{};
    for (const auto& tr : trees) models.emplace_back(kind, data, tr, RootPrior::uniform_all);
    for (auto d = 0; d < pool.num_draws(); d += 37) {
      auto p = pool.params(d);
      const auto& model = models[pool.provenance[d].tree];
      CHECK(std::isfinite(pool.log_posterior[d]));
      CHECK(model.log_posterior(p) == doctest::Approx(pool.log_posterior[d]).epsilon(1e-10));
      auto pw = model.pointwise_loglik(p);
      for (auto v = 0; v != 3; ++v) CHECK(pw[v] == doctest::Approx(pool.pointwise(d, v)).epsilon(1e-10));
    }
    auto again = sample(kind, data, trees, cfg);
    CHECK(again.draws == pool.draws);
    CHECK(again.pointwise == pool.pointwise);
    auto serial = cfg;
    serial.threads = 1;
    CHECK(sample(kind, data, trees, serial).draws == pool.draws);
    CHECK(pool.rhat.size() == static_cast<std::size_t>(pool.draws.cols()));
  }
}

TEST_CASE("sample: configuration errors") {
  auto data = all_missing(1, {"A", "B"});
  auto cfg = SamplerConfig{};
  cfg.iterations = 10;
  cfg.warmup = 10;
  CHECK_THROWS_AS(sample(ModelKind::flat, data, {two_tip()}, cfg), Error);
  cfg.warmup = 5;
  CHECK_THROWS_AS(sample(ModelKind::flat, data, {}, cfg), Error);
  cfg.chains = 0;
  CHECK_THROWS_AS(sample(ModelKind::flat, data, {two_tip()}, cfg), Error);
}

TEST_CASE("sample: one chain gives no R-hat but still samples") {
  auto data = all_missing(1, {"A", "B"});
  auto cfg = SamplerConfig{};
  cfg.iterations = 60;
  cfg.warmup = 20;
  cfg.chains = 1;
  auto pool = sample(ModelKind::flat, data, {two_tip()}, cfg);
  CHECK(pool.num_draws() == 40);
  CHECK(std::isnan(pool.rhat[0]));
}

TEST_CASE("split R-hat") {
  auto rng = std::mt19937_64{6};
  auto normal = std::normal_distribution<double>{0.0, 1.0};
  auto chain = std::vector<double>(1000);
  for (auto& x : chain) x = normal(rng);

  SUBCASE("identical chains") {
    auto r = split_rhat({chain, chain, chain, chain});
    // Copies agree with each other, but split halves of one chain are
    // independent normals, so R-hat sits at 1 up to sampling noise.
    CHECK(r.value == doctest::Approx(1.0).epsilon(0.01));
    // When the split halves are copies too, the between-chain variance is
    // exactly zero and R-hat reduces to sqrt((n - 1) / n) for halves of n.
    auto half = std::vector<double>(chain.begin(), chain.begin() + 500);
    auto doubled = half;
    doubled.insert(doubled.end(), half.begin(), half.end());
    CHECK(split_rhat({doubled, doubled}).value == doctest::Approx(std::sqrt(499.0 / 500.0)).epsilon(1e-12));
  }
  SUBCASE("chains at disjoint constants diverge") {
    for (auto n : {20, 200, 2000}) {
      auto a = std::vector<double>(n);
      auto b = std::vector<double>(n);
      for (auto i = 0; i != n; ++i) {
        a[i] = 0.0 + 1e-3 * normal(rng);
        b[i] = 5.0 + 1e-3 * normal(rng);
      }
      CHECK(split_rhat({a, b}).value > 100.0);
    }
    CHECK(std::isinf(split_rhat({std::vector<double>(20, 0.0), std::vector<double>(20, 1.0)}).value));
  }
  SUBCASE("independent normal chains") {
    auto chains = std::vector<std::vector<double>>(4, std::vector<double>(1000));
    for (auto& c : chains) {
      for (auto& x : c) x = normal(rng);
    }
    CHECK(split_rhat(chains).value < 1.01);
    CHECK(split_rhat(chains).value > 0.99);
  }
  SUBCASE("zero variance is reported as one with a flag") {
    auto r = split_rhat({std::vector<double>(50, 2.0), std::vector<double>(50, 2.0)});
    CHECK(r.value == 1.0);
    CHECK(r.zero_variance);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(split_rhat({chain}), Error);
    CHECK_THROWS_AS(split_rhat({std::vector<double>(9), std::vector<double>(9)}), Error);
  }
}

TEST_CASE("initialize") {
  auto rng = std::mt19937_64{7};
  auto tree = oracle::random_painting(rng, oracle::random_tree(rng, 5));
  auto data = CharacterMatrix{{"a"}, tree.tree().tip_labels(), {{0, 3, 3, 1, 2}}};
  auto model = PosteriorModel{ModelKind::hierarchical, data, tree, RootPrior::uniform_all};
  auto inits = std::vector<std::vector<double>>{};
  for (auto seed : {1, 2, 3}) {
    auto r = chain_rng(seed, 0, 0);
    auto p = initialize(model, r);
    CHECK(std::isfinite(model.log_posterior(p)));
    for (auto x : p.to_vector()) {
      CHECK(x >= -2.0);
      CHECK(x <= 2.0);
    }
    inits.push_back(p.to_vector());
  }
  CHECK(inits[0] != inits[1]);
  CHECK(inits[1] != inits[2]);
  CHECK(std::isfinite(model.log_posterior(ModelParams::zeros(ModelKind::hierarchical, 1))));

  // Data that no parameter value can explain: a living tip under a DEAD-only root prior.
  auto dead_root = PosteriorModel{ModelKind::flat, CharacterMatrix{{"a"}, tree.tree().tip_labels(), {{0, 0, 0, 0, 0}}},
                                  tree, RootPrior::uniform_living};
  auto r = chain_rng(1, 0, 0);
  CHECK_NOTHROW(initialize(dead_root, r));
}

TEST_CASE("chain_rng: distinct streams per seed, tree and chain") {
  auto first = [](std::mt19937_64 r) { return r(); };
  CHECK(first(chain_rng(1, 0, 0)) == first(chain_rng(1, 0, 0)));
  CHECK(first(chain_rng(1, 0, 0)) != first(chain_rng(1, 0, 1)));
  CHECK(first(chain_rng(1, 0, 0)) != first(chain_rng(1, 1, 0)));
  CHECK(first(chain_rng(1, 0, 0)) != first(chain_rng(2, 0, 0)));
}

TEST_CASE("AdaptiveScale moves toward the target acceptance") {
  auto s = AdaptiveScale{1.0};
  for (auto k = 0; k != 100; ++k) s.update(true, 0.3);
  CHECK(s.scale() > 1.0);
  auto t = AdaptiveScale{1.0};
  for (auto k = 0; k != 100; ++k) t.update(false, 0.3);
  CHECK(t.scale() < 1.0);
  CHECK(t.acceptance_rate() == 0.0);
}
