// Generates the synthetic Germanic stand-in data set shipped under data/.
//
// Tree: twelve Germanic languages dated in millennia before present, with Old
// Saxon and Low German grafted on.  Verbs: simulated on the painted MCC tree
// with a retention effect on ABB in the E regime.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <set>
#include <algorithm>

#include <CLI11.hpp>
#include <json.hpp>

#include "stemalt/csv.h"
#include "stemalt/graft.h"
#include "stemalt/newick.h"
#include "stemalt/regime.h"
#include "stemalt/simulate.h"

using namespace stemalt;

namespace {

constexpr auto k_base_mcc =
    "(Gothic:0.75,(((Icelandic:0.95,Faroese:0.95):0.2,(Norwegian:0.85,(Danish:0.7,Swedish:0.7):0.15):0.3):0.8,"
    "(('West Frisian':1.55,('Old English':0.3,English:1.3):0.25):0.15,"
    "(Dutch:1.5,('Old High German':0.2,German:1.3):0.2):0.2):0.25):0.45):0;";

auto ages_of(const TimedTree& tree) -> std::vector<double> {
  auto ages = std::vector<double>(tree.size());
  for (auto n = 0; n != tree.size(); ++n) ages[n] = tree.age(n);
  return ages;
}

auto tree_from_ages(const TimedTree& tree, const std::vector<double>& ages) -> TimedTree {
  auto nodes = tree.nodes();
  for (auto n = 0; n != tree.size(); ++n) {
    nodes[n].length = n == tree.root() ? 0.0 : ages[tree.at(n).parent] - ages[n];
  }
  return TimedTree{std::move(nodes), tree.root()};
}

// Internal node ages scaled by independent factors in [1 - jitter, 1 + jitter],
// pushed up where needed to stay older than their children.
auto jitter_ages(const TimedTree& tree, double jitter, std::mt19937_64& rng) -> TimedTree {
  auto uniform = std::uniform_real_distribution<double>{1.0 - jitter, 1.0 + jitter};
  auto ages = ages_of(tree);
  for (auto n : tree.postorder()) {
    if (tree.is_tip(n)) continue;
    auto oldest_child = 0.0;
    for (auto c : tree.at(n).children) oldest_child = std::max(oldest_child, ages[c]);
    ages[n] = std::max(ages[n] * uniform(rng), oldest_child + 0.02);
  }
  return tree_from_ages(tree, ages);
}

auto graft_saxon(const TimedTree& tree, std::mt19937_64& rng) -> TimedTree {
  auto saxon = GraftSpec{};
  saxon.taxon = "Old Saxon";
  saxon.mode = GraftSpec::Mode::sister_to_mrca;
  saxon.anchor_a = "Old High German";
  saxon.anchor_b = "German";
  saxon.attach_fraction = 0.5;
  saxon.tip_age = TipAge::around("Old High German", 0.1);
  auto with_saxon = graft_taxon(tree, saxon, rng);

  auto low = GraftSpec{};
  low.taxon = "Low German";
  low.mode = GraftSpec::Mode::child_of_taxon;
  low.anchor_a = "Old Saxon";
  low.attach_offset = 0.05;
  low.tip_age = TipAge::at(0.0);
  return graft_taxon(with_saxon, low, rng);
}

// Rates i -> j = scale * target_j, whose stationary distribution is `target`.
auto proportional_rates(const std::array<double, k_num_living>& target, double scale) -> LivingRates {
  auto rates = LivingRates{};
  for (auto t = 0; t != k_num_transitions; ++t) rates[t] = scale * target[transition_target(t)];
  return rates;
}

}  // namespace

int main(int argc, char** argv) {
  auto app = CLI::App{"Generate the synthetic Germanic stand-in data set"};
  auto out_dir = std::string{"data"};
  auto seed = std::uint64_t{20240607};
  auto num_verbs = 107;
  auto num_trees = 50;
  auto n_scale = 0.3;
  auto into_abb = 2.5;
  auto abb_exit = 0.1;
  auto verb_sd = 0.3;
  auto death = 0.05;
  auto missing = 0.04;
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed);
  app.add_option("--verbs", num_verbs);
  app.add_option("--trees", num_trees, "size of the tree sample");
  app.add_option("--n-scale", n_scale, "overall rate in the N regime (per millennium)");
  app.add_option("--into-abb", into_abb, "E-regime multiplier on rates into ABB");
  app.add_option("--abb-exit", abb_exit, "E-regime multiplier on rates out of ABB");
  app.add_option("--verb-sd", verb_sd, "per-verb log-rate standard deviation");
  app.add_option("--death", death);
  app.add_option("--missing", missing, "fraction of cells coded missing");
  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out_dir);
    auto rng = std::mt19937_64{seed};
    auto base = parse_newick(k_base_mcc);

    auto base_sample = TreeSample{{}, "synthetic stand-in: base MCC tree with internal ages jittered by +-8%"};
    auto grafted_sample = TreeSample{{}, "synthetic stand-in: base sample with Old Saxon and Low German grafted"};
    for (auto k = 0; k != num_trees; ++k) {
      auto tree = jitter_ages(base, 0.08, rng);
      base_sample.trees.push_back(tree);
      grafted_sample.trees.push_back(graft_saxon(tree, rng));
    }
    auto mcc = graft_saxon(base, rng);
    write_text_file(out_dir + "/germanic_base_mcc.nwk", write_newick(base) + "\n");
    write_tree_sample(out_dir + "/germanic_base_sample.nwk", base_sample);
    write_text_file(out_dir + "/germanic_mcc.nwk", write_newick(mcc) + "\n");
    write_tree_sample(out_dir + "/germanic_sample.nwk", grafted_sample);

    auto extended = std::set<std::string>{"German", "Dutch", "Old High German", "Low German"};
    auto tam = TamObservation{};
    auto tam_csv = std::string{"taxon,state\n"};
    for (const auto& taxon : mcc.tip_labels()) {
      auto r = extended.contains(taxon) ? Regime::E : Regime::N;
      tam.by_taxon[taxon] = r;
      tam_csv += "\"" + taxon + "\"," + std::string{regime_name(r)} + "\n";
    }
    write_text_file(out_dir + "/tam.csv", tam_csv);

    auto mk = fit_binary_mk(mcc, tam);
    auto painted = paint_regimes(mcc, mk, tam);

    // N is mostly AAA and ABB.  E draws verbs into ABB and holds them there;
    // the other rates are shared, so only AAA and ABB shift much.
    auto n_target = std::array<double, k_num_living>{0.55, 0.03, 0.03, 0.35, 0.04};
    auto n_rates = proportional_rates(n_target, n_scale);
    auto e_rates = n_rates;
    auto abb = static_cast<int>(PatternState::ABB);
    for (auto t = 0; t != k_num_transitions; ++t) {
      if (transition_target(t) == abb) e_rates[t] *= into_abb;
      if (transition_source(t) == abb) e_rates[t] *= abb_exit;
    }

    auto normal = std::normal_distribution<double>{0.0, 1.0};
    auto root_dist = std::discrete_distribution<int>(n_target.begin(), n_target.end());
    auto verbs = std::vector<SimulatedVerb>{};
    for (auto v = 0; v != num_verbs; ++v) {
      auto verb = SimulatedVerb{};
      auto n = n_rates;
      auto e = e_rates;
      for (auto t = 0; t != k_num_transitions; ++t) {
        n[t] *= std::exp(verb_sd * normal(rng));
        e[t] *= std::exp(verb_sd * normal(rng));
      }
      verb.q[static_cast<int>(Regime::N)] = RateMatrix::build(n, death);
      verb.q[static_cast<int>(Regime::E)] = RateMatrix::build(e, death);
      verb.root_state = root_dist(rng);
      verbs.push_back(verb);
    }
    auto data = simulate_characters(painted, verbs, rng);

    auto names = std::vector<std::string>{};
    auto cells = std::vector<std::vector<int>>{};
    auto roots = RootStates{};
    auto uniform = std::uniform_real_distribution<double>{0.0, 1.0};
    char name[16];
    for (auto v = 0; v != data.num_verbs(); ++v) {
      std::snprintf(name, sizeof name, "sv%03d", v + 1);
      names.emplace_back(name);
      auto row = data.row(v);
      for (auto& cell : row) {
        if (uniform(rng) < missing) cell = k_missing;
      }
      if (std::all_of(row.begin(), row.end(), [](int c) { return c == k_missing; })) row = data.row(v);
      cells.push_back(std::move(row));
      roots.verbs.emplace_back(name);
      roots.states.push_back(verbs[v].root_state);
    }
    auto coded = CharacterMatrix{names, data.taxa(), std::move(cells)};
    write_text_file(out_dir + "/verbs.csv", write_character_csv(coded));
    write_text_file(out_dir + "/expert_roots.csv", write_root_states_csv(roots));

    auto truth = nlohmann::ordered_json{};
    truth["seed"] = seed;
    truth["death"] = death;
    truth["verb_log_sd"] = verb_sd;
    truth["missing_fraction"] = missing;
    truth["tam_rates"] = {{"n_to_e", mk.n_to_e}, {"e_to_n", mk.e_to_n}};
    auto regime_json = [&](const LivingRates& rates) {
      auto q = RateMatrix::build(rates, death);
      auto pi = stationary_distribution(q);
      auto j = nlohmann::ordered_json{};
      for (auto s = 0; s != k_num_living; ++s) {
        j[std::string{state_name(s)}] = {{"stationary", pi(s)}, {"exit", exit_rate(q, s)},
                                         {"entry", entry_rate(q, s, pi)}};
      }
      return j;
    };
    truth["N"] = regime_json(n_rates);
    truth["E"] = regime_json(e_rates);
    write_text_file(out_dir + "/standin_truth.json", truth.dump(2) + "\n");
    std::cout << "wrote stand-in data to " << out_dir << " (E length " << painted.regime_length(Regime::E)
              << " of " << mcc.total_length() << ")\n";
  } catch (const std::exception& e) {
    std::cerr << "make_standin_data: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
