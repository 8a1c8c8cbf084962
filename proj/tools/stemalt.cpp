#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "stemalt/analysis.h"
#include "stemalt/csv.h"
#include "stemalt/draw_store.h"
#include "stemalt/graft.h"
#include "stemalt/newick.h"
#include "stemalt/simulate.h"
#include "stemalt/svg.h"
#include "stemalt/validate.h"

using namespace stemalt;
using Json = nlohmann::ordered_json;

namespace {

constexpr auto k_version = "0.1.0";

auto sha256_file(const std::string& path) -> std::string {
  auto bytes = read_text_file(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error{"sha256 failed for " + path};
  }
  auto out = std::string{};
  char hex[3];
  for (auto i = 0u; i != length; ++i) {
    std::snprintf(hex, sizeof hex, "%02x", digest[i]);
    out += hex;
  }
  return out;
}

// Per-run record: settings, input and output hashes, warnings.  Contains no
// timestamps, so identical runs give identical manifests.
class Manifest {
 public:
  Manifest(std::string command, std::string out_dir) : out_dir_{std::move(out_dir)} {
    json_["tool"] = "stemalt";
    json_["version"] = k_version;
    json_["command"] = std::move(command);
    json_["settings"] = Json::object();
    json_["inputs"] = Json::object();
    json_["outputs"] = Json::object();
    json_["warnings"] = Json::array();
  }

  template <typename T>
  auto setting(const std::string& key, const T& value) -> void {
    json_["settings"][key] = value;
  }
  auto input(const std::string& path) -> void {
    if (std::filesystem::is_directory(path)) {
      for (const auto& name : {"manifest.json", "draws.bin"}) {
        auto file = path + "/" + name;
        if (std::filesystem::exists(file)) json_["inputs"][file] = sha256_file(file);
      }
      return;
    }
    json_["inputs"][path] = sha256_file(path);
  }
  auto output(const std::string& name) -> void { json_["outputs"][name] = sha256_file(out_dir_ + "/" + name); }
  auto warn(const std::string& text) -> void {
    std::cerr << "warning: " << text << "\n";
    json_["warnings"].push_back(text);
  }
  auto write() -> void { write_text_file(out_dir_ + "/run_manifest.json", json_.dump(2) + "\n"); }

 private:
  std::string out_dir_;
  Json json_;
};

auto require_file(const std::string& path, const std::string& what) -> void {
  if (path.empty()) throw Error{"missing " + what};
  if (!std::filesystem::exists(path)) throw Error{what + " '" + path + "' does not exist"};
}

auto prepare_out_dir(const std::string& dir) -> void {
  if (dir.empty()) throw Error{"missing --out directory"};
  std::filesystem::create_directories(dir);
  auto probe = dir + "/.write_probe";
  {
    auto f = std::ofstream{probe};
    if (!f) throw Error{"output directory '" + dir + "' is not writable"};
  }
  std::filesystem::remove(probe);
}

auto fmt(double x) -> std::string { return format_double(x); }

// ---------------------------------------------------------------- graft

struct GraftArgs {
  std::string trees, out, taxon, mode = "sister", anchor_a, anchor_b, age_around;
  double fraction = 0.5, offset = 0.0, tip_age = 0.0, halfwidth = 0.1;
};

auto run_graft(const GraftArgs& a, std::uint64_t seed) -> void {
  require_file(a.trees, "tree file");
  if (a.out.empty()) throw Error{"missing --out file"};
  auto spec = GraftSpec{};
  spec.taxon = a.taxon;
  if (a.mode == "sister") {
    spec.mode = GraftSpec::Mode::sister_to_mrca;
  } else if (a.mode == "child") {
    spec.mode = GraftSpec::Mode::child_of_taxon;
  } else {
    throw Error{"--mode must be 'sister' or 'child'"};
  }
  spec.anchor_a = a.anchor_a;
  spec.anchor_b = a.anchor_b;
  spec.attach_fraction = a.fraction;
  spec.attach_offset = a.offset;
  spec.tip_age = a.age_around.empty() ? TipAge::at(a.tip_age) : TipAge::around(a.age_around, a.halfwidth);
  auto sample = read_tree_sample(a.trees);
  auto rng = std::mt19937_64{seed};
  auto out = TreeSample{{}, sample.provenance};
  for (const auto& tree : sample.trees) out.trees.push_back(graft_taxon(tree, spec, rng));
  write_tree_sample(a.out, out);
  std::cout << "grafted " << a.taxon << " onto " << out.trees.size() << " tree(s) -> " << a.out << "\n";
}

// ---------------------------------------------------------------- paint

struct PaintArgs {
  std::string trees, tam, out;
  PaintOptions options;
};

auto run_paint(const PaintArgs& a) -> void {
  require_file(a.trees, "tree file");
  require_file(a.tam, "TAM file");
  prepare_out_dir(a.out);
  auto manifest = Manifest{"paint", a.out};
  manifest.input(a.trees);
  manifest.input(a.tam);
  manifest.setting("grid_points_per_branch", a.options.grid_points_per_branch);
  manifest.setting("threshold", a.options.threshold);
  manifest.setting("sticky_e", a.options.sticky_e);

  auto sample = read_tree_sample(a.trees);
  auto obs = read_tam_csv(a.tam);
  auto painted = std::vector<PaintedTree>{};
  auto rates_csv = std::string{"tree,n_to_e,e_to_n,log_likelihood,e_length,total_length\n"};
  auto branch_csv = std::string{"tree,clade,length,p_e_parent_end,p_e_midpoint,p_e_child_end,e_length\n"};
  for (auto t = 0; t != static_cast<int>(sample.trees.size()); ++t) {
    const auto& tree = sample.trees[t];
    check_tam_coverage(tree, obs);
    auto rates = fit_binary_mk(tree, obs);
    auto p = paint_regimes(tree, rates, obs, a.options);
    auto marginals = RegimeMarginals{tree, obs, rates};
    for (auto n = 0; n != tree.size(); ++n) {
      if (n == tree.root()) continue;
      auto e_length = 0.0;
      for (const auto& s : p.segments(n)) {
        if (s.regime == Regime::E) e_length += s.length;
      }
      branch_csv += std::to_string(t) + ",\"" + clade_name(tree, n) + "\"," + fmt(tree.at(n).length) + "," +
                    fmt(marginals.p_extended(n, 0.0)) + "," + fmt(marginals.p_extended(n, 0.5)) + "," +
                    fmt(marginals.p_extended(n, 1.0)) + "," + fmt(e_length) + "\n";
    }
    rates_csv += std::to_string(t) + "," + fmt(rates.n_to_e) + "," + fmt(rates.e_to_n) + "," +
                 fmt(rates.log_likelihood) + "," + fmt(p.regime_length(Regime::E)) + "," +
                 fmt(tree.total_length()) + "\n";
    painted.push_back(std::move(p));
  }
  write_painted_trees(a.out + "/painted.nwk", painted);
  write_text_file(a.out + "/mk_rates.csv", rates_csv);
  write_text_file(a.out + "/branch_probabilities.csv", branch_csv);
  for (const auto& name : {"painted.nwk", "mk_rates.csv", "branch_probabilities.csv"}) manifest.output(name);
  manifest.write();
  std::cout << "painted " << painted.size() << " tree(s) -> " << a.out << "/painted.nwk\n";
}

// ---------------------------------------------------------------- fit

struct SamplerArgs {
  int iterations = 4000;
  int warmup = 2000;
  int chains = 4;
  double target = 0.3;
};

auto sampler_config(const SamplerArgs& s, std::uint64_t seed, int threads) -> SamplerConfig {
  auto cfg = SamplerConfig{};
  cfg.iterations = s.iterations;
  cfg.warmup = s.warmup;
  cfg.chains = s.chains;
  cfg.target_acceptance = s.target;
  cfg.seed = seed;
  cfg.threads = threads;
  return cfg;
}

struct FitArgs {
  std::string model = "hierarchical", data, painted, roots, out, root_prior;
  int tree_limit = 0;
  int tree_index = -1;
  double epsilon = 1e-6;
  SamplerArgs sampler;
};

auto parse_root_prior(const std::string& text, ModelKind kind) -> RootPrior {
  if (text.empty()) return kind == ModelKind::ancestry_constrained ? RootPrior::uniform_living : RootPrior::uniform_all;
  if (text == "all") return RootPrior::uniform_all;
  if (text == "living") return RootPrior::uniform_living;
  throw Error{"--root-prior must be 'all' or 'living'"};
}

auto select_trees(std::vector<PaintedTree> trees, int limit, int index) -> std::vector<PaintedTree> {
  if (index >= 0) {
    if (index >= static_cast<int>(trees.size())) throw Error{"--tree-index out of range"};
    return {trees[index]};
  }
  if (limit > 0 && limit < static_cast<int>(trees.size())) trees.resize(limit);
  return trees;
}

// Models as fitted: for the ancestry-constrained kind each tree gains the
// root anchor branch and data column.
auto build_models(ModelKind kind, const CharacterMatrix& data, const std::vector<PaintedTree>& trees,
                  const std::string& roots_path, double epsilon, RootPrior prior) -> std::vector<PosteriorModel> {
  auto models = std::vector<PosteriorModel>{};
  auto roots = RootStates{};
  if (kind == ModelKind::ancestry_constrained) {
    require_file(roots_path, "expert root file (--roots)");
    roots = read_root_states_csv(roots_path);
  }
  for (const auto& tree : trees) {
    if (kind == ModelKind::ancestry_constrained) {
      auto problem = constrain_root(tree, data, roots, epsilon);
      models.emplace_back(kind, std::move(problem.data), std::move(problem.painted), prior);
    } else {
      models.emplace_back(kind, data, tree, prior);
    }
  }
  return models;
}

auto run_fit(const FitArgs& a, std::uint64_t seed, int threads) -> void {
  require_file(a.data, "character file");
  require_file(a.painted, "painted tree file");
  prepare_out_dir(a.out);
  auto kind = parse_model_kind(a.model);
  auto prior = parse_root_prior(a.root_prior, kind);
  auto cfg = sampler_config(a.sampler, seed, threads);
  cfg.validate();

  auto manifest = Manifest{"fit", a.out};
  manifest.input(a.data);
  manifest.input(a.painted);
  if (!a.roots.empty()) manifest.input(a.roots);
  manifest.setting("model", std::string{model_kind_name(kind)});
  manifest.setting("root_prior", prior == RootPrior::uniform_all ? "all" : "living");
  manifest.setting("epsilon", a.epsilon);
  manifest.setting("iterations", cfg.iterations);
  manifest.setting("warmup", cfg.warmup);
  manifest.setting("chains", cfg.chains);
  manifest.setting("target_acceptance", cfg.target_acceptance);
  manifest.setting("seed", seed);
  manifest.setting("tree_limit", a.tree_limit);
  manifest.setting("tree_index", a.tree_index);

  auto data = read_character_csv(a.data);
  auto trees = select_trees(read_painted_trees(a.painted), a.tree_limit, a.tree_index);
  auto models = build_models(kind, data, trees, a.roots, a.epsilon, prior);
  manifest.setting("num_trees", static_cast<int>(models.size()));
  manifest.setting("num_verbs", data.num_verbs());
  manifest.setting("num_parameters", parameter_count(kind, data.num_verbs()));

  auto pool = sample(models, cfg);
  write_draw_store(pool, a.out);
  auto rhat_csv = std::string{"parameter,rhat\n"};
  for (auto c = 0u; c != pool.param_names.size(); ++c) {
    rhat_csv += "\"" + pool.param_names[c] + "\"," + fmt(pool.rhat[c]) + "\n";
  }
  write_text_file(a.out + "/rhat.csv", rhat_csv);
  for (const auto& w : pool.warnings) manifest.warn(w);
  for (const auto& name : {"draws.bin", "manifest.json", "rhat.csv"}) manifest.output(name);
  manifest.write();
  std::cout << "fitted " << model_kind_name(kind) << " model: " << pool.num_draws() << " draws of "
            << pool.param_names.size() << " parameters -> " << a.out << "\n";
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string draws, out;
  double hdi = 0.95;
  bool svg = false;
};

auto load_pool(const std::string& dir) -> PosteriorPool {
  if (dir.empty()) throw Error{"missing --draws directory"};
  if (!std::filesystem::exists(dir + "/manifest.json")) {
    throw Error{"draw store '" + dir + "' not found (run `stemalt fit` first)"};
  }
  return read_draw_store(dir);
}

auto run_analyze(const AnalyzeArgs& a) -> void {
  auto pool = load_pool(a.draws);
  prepare_out_dir(a.out);
  auto manifest = Manifest{"analyze", a.out};
  manifest.input(a.draws);
  manifest.setting("hdi", a.hdi);
  auto summary = regime_differences(pool, a.hdi);
  if (summary.excluded_draws > 0) {
    manifest.warn(std::to_string(summary.excluded_draws) + " draws excluded: reducible expected rate matrix");
  }
  auto csv = std::string{"quantity,state,lo,hi,decisive\n"};
  auto json = Json{};
  json["hdi"] = a.hdi;
  json["used_draws"] = summary.used_draws;
  json["excluded_draws"] = summary.excluded_draws;
  for (auto q = 0; q != k_num_quantities; ++q) {
    auto quantity = static_cast<RateQuantity>(q);
    for (auto s = 0; s != k_num_living; ++s) {
      const auto& iv = summary.interval(quantity, s);
      auto decisive = summary.decisive(quantity, s);
      csv += std::string{quantity_name(quantity)} + "," + std::string{state_name(s)} + "," + fmt(iv.lo) + "," +
             fmt(iv.hi) + "," + (decisive ? "true" : "false") + "\n";
      json["differences"][std::string{quantity_name(quantity)}][std::string{state_name(s)}] = {
          {"lo", iv.lo}, {"hi", iv.hi}, {"decisive", decisive}};
    }
  }
  write_text_file(a.out + "/regime_differences.csv", csv);
  write_text_file(a.out + "/summary.json", json.dump(2) + "\n");
  manifest.output("regime_differences.csv");
  manifest.output("summary.json");
  if (a.svg) {
    for (auto q = 0; q != k_num_quantities; ++q) {
      auto name = std::string{quantity_name(static_cast<RateQuantity>(q))} + ".svg";
      write_text_file(a.out + "/" + name, svg_interval_plot(summary, static_cast<RateQuantity>(q)));
      manifest.output(name);
    }
  }
  manifest.write();
  std::cout << csv;
}

// ---------------------------------------------------------------- reconstruct

struct ReconstructArgs {
  std::string draws, data, painted, expert, out, roots, root_prior;
  int tree_limit = 0;
  int tree_index = -1;
  double epsilon = 1e-6;
};

auto run_reconstruct(const ReconstructArgs& a, std::uint64_t seed) -> void {
  auto pool = load_pool(a.draws);
  require_file(a.data, "character file");
  require_file(a.painted, "painted tree file");
  prepare_out_dir(a.out);
  auto manifest = Manifest{"reconstruct", a.out};
  manifest.input(a.draws);
  manifest.input(a.data);
  manifest.input(a.painted);
  manifest.setting("seed", seed);
  auto data = read_character_csv(a.data);
  auto trees = select_trees(read_painted_trees(a.painted), a.tree_limit, a.tree_index);
  auto prior = parse_root_prior(a.root_prior, pool.kind);
  auto models = build_models(pool.kind, data, trees, a.roots, a.epsilon, prior);
  auto result = reconstruct_all(pool, models, seed);

  auto expert = std::optional<RootStates>{};
  if (!a.expert.empty()) {
    require_file(a.expert, "expert root file");
    manifest.input(a.expert);
    expert = read_root_states_csv(a.expert);
  }
  auto csv = std::string{"verb,modal,tie"};
  for (auto s = 0; s != k_num_states; ++s) csv += ",p_" + std::string{state_name(s)};
  csv += expert ? ",expert,match\n" : "\n";
  auto matches = 0;
  for (const auto& r : result) {
    csv += r.verb + "," + std::string{state_name(r.modal)} + "," + (r.tie ? "true" : "false");
    for (auto s = 0; s != k_num_states; ++s) csv += "," + fmt(r.frequencies(s));
    if (expert) {
      auto e = expert->state_of(r.verb);
      matches += e == r.modal;
      csv += "," + std::string{state_name(e)} + "," + (e == r.modal ? "true" : "false");
    }
    csv += "\n";
    if (r.tie) manifest.warn("tied modal root state for " + r.verb);
  }
  write_text_file(a.out + "/reconstruction.csv", csv);
  manifest.output("reconstruction.csv");
  auto json = Json{};
  json["num_verbs"] = result.size();
  if (expert) {
    json["matches"] = matches;
    json["accuracy"] = static_cast<double>(matches) / static_cast<double>(result.size());
    std::cout << "root reconstruction matches the expert state for " << matches << " of " << result.size()
              << " verbs\n";
  }
  write_text_file(a.out + "/reconstruction.json", json.dump(2) + "\n");
  manifest.output("reconstruction.json");
  manifest.write();
}

// ---------------------------------------------------------------- compare

struct CompareArgs {
  std::string a, b, out;
};

auto run_compare(const CompareArgs& args) -> void {
  auto pool_a = load_pool(args.a);
  auto pool_b = load_pool(args.b);
  if (pool_a.verbs != pool_b.verbs) throw Error{"compare: the two fits cover different verbs"};
  prepare_out_dir(args.out);
  auto manifest = Manifest{"compare", args.out};
  manifest.input(args.a);
  manifest.input(args.b);
  auto loo_a = psis_loo(pool_a.pointwise);
  auto loo_b = psis_loo(pool_b.pointwise);
  for (const auto& w : loo_a.warnings) manifest.warn("a: " + w);
  for (const auto& w : loo_b.warnings) manifest.warn("b: " + w);
  auto diff = compare(loo_a, loo_b);
  auto csv = std::string{"verb,elpd_a,elpd_b,k_a,k_b\n"};
  for (auto v = 0u; v != pool_a.verbs.size(); ++v) {
    csv += pool_a.verbs[v] + "," + fmt(loo_a.pointwise[v]) + "," + fmt(loo_b.pointwise[v]) + "," +
           fmt(loo_a.pareto_k[v]) + "," + fmt(loo_b.pareto_k[v]) + "\n";
  }
  write_text_file(args.out + "/pointwise_elpd.csv", csv);
  auto json = Json{};
  json["a"] = {{"model", std::string{model_kind_name(pool_a.kind)}}, {"elpd", loo_a.elpd}, {"se", loo_a.se}};
  json["b"] = {{"model", std::string{model_kind_name(pool_b.kind)}}, {"elpd", loo_b.elpd}, {"se", loo_b.se}};
  json["delta_elpd"] = diff.delta;
  json["se_delta"] = diff.se;
  json["exceeds_2se"] = std::abs(diff.delta) > 2.0 * diff.se;
  write_text_file(args.out + "/compare.json", json.dump(2) + "\n");
  manifest.output("pointwise_elpd.csv");
  manifest.output("compare.json");
  manifest.write();
  std::cout << "ELPD a - b = " << diff.delta << " (SE " << diff.se << ")\n";
}

// ---------------------------------------------------------------- simulate / validate

struct SimArgs {
  std::string painted, tree, out, root = "ABC";
  SimConfig cfg;
  std::vector<double> levels{0.89, 0.95, 0.99};
  int num_trees = 5;
  SamplerArgs sampler{3000, 1500, 4, 0.3};
};

auto sim_config(const SimArgs& a, std::uint64_t seed) -> SimConfig {
  auto cfg = a.cfg;
  auto state = parse_state(a.root);
  if (!state || *state == PatternState::DEAD) throw Error{"--root must be a living state"};
  cfg.root_state = *state;
  cfg.seed = seed;
  cfg.hdi_levels = a.levels;
  cfg.validate();
  return cfg;
}

auto run_simulate(const SimArgs& a, std::uint64_t seed) -> void {
  if (a.out.empty()) throw Error{"missing --out file"};
  auto cfg = sim_config(a, seed);
  auto data = CharacterMatrix{};
  if (!a.painted.empty()) {
    require_file(a.painted, "painted tree file");
    data = simulate_dataset(cfg, read_painted_trees(a.painted).front());
  } else {
    require_file(a.tree, "tree file");
    data = simulate_dataset(cfg, read_tree_sample(a.tree).trees.front());
  }
  write_text_file(a.out, write_character_csv(data));
  std::cout << "simulated " << data.num_verbs() << " verbs on " << data.num_taxa() << " taxa -> " << a.out << "\n";
}

auto run_validate(const SimArgs& a, std::uint64_t seed, int threads) -> void {
  require_file(a.painted, "painted tree file");
  prepare_out_dir(a.out);
  auto cfg = sim_config(a, seed);
  auto sampler = sampler_config(a.sampler, seed, threads);
  auto manifest = Manifest{"validate", a.out};
  manifest.input(a.painted);
  manifest.setting("num_trees", a.num_trees);
  manifest.setting("num_verbs", cfg.num_verbs);
  manifest.setting("mu", cfg.mu);
  manifest.setting("sigma", cfg.sigma);
  manifest.setting("death", cfg.death);
  manifest.setting("root", a.root);
  manifest.setting("e_abb_exit_multiplier", cfg.e_abb_exit_multiplier);
  manifest.setting("iterations", sampler.iterations);
  manifest.setting("warmup", sampler.warmup);
  manifest.setting("chains", sampler.chains);
  manifest.setting("seed", seed);
  auto trees = select_trees(read_painted_trees(a.painted), a.num_trees, -1);
  auto report = false_positive_study(cfg, trees, sampler);
  for (const auto& w : report.warnings) manifest.warn(w);
  auto csv = std::string{"tree,state,level,lo,hi,decisive\n"};
  for (const auto& c : report.cells) {
    csv += std::to_string(c.tree) + "," + std::string{state_name(c.state)} + "," + fmt(c.level) + "," +
           fmt(c.interval.lo) + "," + fmt(c.interval.hi) + "," + (c.decisive ? "true" : "false") + "\n";
  }
  write_text_file(a.out + "/study.csv", csv);
  auto json = Json{};
  for (auto i = 0u; i != report.levels.size(); ++i) json["decisive_rate"][fmt(report.levels[i])] = report.rates[i];
  json["max_rhat"] = report.max_rhat;
  write_text_file(a.out + "/study.json", json.dump(2) + "\n");
  manifest.output("study.csv");
  manifest.output("study.json");
  manifest.write();
  for (auto i = 0u; i != report.levels.size(); ++i) {
    std::cout << "decisive rate at " << report.levels[i] << " HDI: " << report.rates[i] << "\n";
  }
}

auto add_sampler_options(CLI::App* cmd, SamplerArgs& s) -> void {
  cmd->add_option("--iterations", s.iterations, "iterations per chain, warmup included")->capture_default_str();
  cmd->add_option("--warmup", s.warmup, "warmup iterations discarded")->capture_default_str();
  cmd->add_option("--chains", s.chains, "chains per tree")->capture_default_str();
  cmd->add_option("--target-acceptance", s.target, "acceptance rate targeted during warmup")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  auto app = CLI::App{"Regime-dependent evolution of verb stem alternation patterns on timed trees"};
  app.set_config("--config", "", "TOML file with option values; flags on the command line win");
  app.require_subcommand(1);
  app.fallthrough();
  auto seed = std::uint64_t{1};
  auto threads = 1;
  app.add_option("--seed", seed, "random seed")->capture_default_str();
  app.add_option("--threads", threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  auto graft = GraftArgs{};
  auto* graft_cmd = app.add_subcommand("graft", "attach a taxon to every tree of a sample");
  graft_cmd->add_option("--trees", graft.trees, "Newick file, one tree per line")->required();
  graft_cmd->add_option("--out", graft.out, "output Newick file")->required();
  graft_cmd->add_option("--taxon", graft.taxon, "new tip label")->required();
  graft_cmd->add_option("--mode", graft.mode, "sister (to MRCA of anchors) or child (of anchor-a)");
  graft_cmd->add_option("--anchor-a", graft.anchor_a)->required();
  graft_cmd->add_option("--anchor-b", graft.anchor_b);
  graft_cmd->add_option("--fraction", graft.fraction, "attachment point along the branch above the MRCA");
  graft_cmd->add_option("--offset", graft.offset, "child mode: split this far above the anchor tip");
  graft_cmd->add_option("--tip-age", graft.tip_age, "fixed tip age");
  graft_cmd->add_option("--tip-age-around", graft.age_around, "jitter the tip age around this taxon's age");
  graft_cmd->add_option("--halfwidth", graft.halfwidth, "relative half-width of the jitter");

  auto paint = PaintArgs{};
  auto* paint_cmd = app.add_subcommand("paint", "fit the TAM character and paint regimes");
  paint_cmd->add_option("--trees", paint.trees, "Newick file, one tree per line")->required();
  paint_cmd->add_option("--tam", paint.tam, "CSV taxon,state with state E or N")->required();
  paint_cmd->add_option("--out", paint.out, "output directory")->required();
  paint_cmd->add_option("--grid", paint.options.grid_points_per_branch, "grid points per branch")
      ->capture_default_str();
  paint_cmd->add_option("--threshold", paint.options.threshold, "P(E) threshold")->capture_default_str();
  paint_cmd->add_flag("--sticky-e", paint.options.sticky_e, "keep a lineage E once it turns E");

  auto fit = FitArgs{};
  auto* fit_cmd = app.add_subcommand("fit", "sample the posterior");
  fit_cmd->add_option("--model", fit.model, "flat, hierarchical or constrained")->capture_default_str();
  fit_cmd->add_option("--data", fit.data, "character CSV")->required();
  fit_cmd->add_option("--painted", fit.painted, "painted trees from `stemalt paint`")->required();
  fit_cmd->add_option("--out", fit.out, "output directory")->required();
  fit_cmd->add_option("--roots", fit.roots, "expert root states CSV (constrained model)");
  fit_cmd->add_option("--epsilon", fit.epsilon, "anchor branch length relative to tree height")
      ->capture_default_str();
  fit_cmd->add_option("--root-prior", fit.root_prior, "all (1/6 incl. DEAD) or living (1/5)");
  fit_cmd->add_option("--tree-limit", fit.tree_limit, "use only the first N trees (0 = all)");
  fit_cmd->add_option("--tree-index", fit.tree_index, "use only this tree");
  add_sampler_options(fit_cmd, fit.sampler);

  auto analyze = AnalyzeArgs{};
  auto* analyze_cmd = app.add_subcommand("analyze", "E minus N differences with HDIs");
  analyze_cmd->add_option("--draws", analyze.draws, "fit output directory")->required();
  analyze_cmd->add_option("--out", analyze.out, "output directory")->required();
  analyze_cmd->add_option("--hdi", analyze.hdi, "HDI mass")->capture_default_str();
  analyze_cmd->add_flag("--svg", analyze.svg, "also write interval plots");

  auto reconstruct = ReconstructArgs{};
  auto* reconstruct_cmd = app.add_subcommand("reconstruct", "ancestral root states");
  reconstruct_cmd->add_option("--draws", reconstruct.draws, "fit output directory")->required();
  reconstruct_cmd->add_option("--data", reconstruct.data, "character CSV")->required();
  reconstruct_cmd->add_option("--painted", reconstruct.painted, "painted trees used for the fit")->required();
  reconstruct_cmd->add_option("--out", reconstruct.out, "output directory")->required();
  reconstruct_cmd->add_option("--expert", reconstruct.expert, "expert root states CSV for scoring");
  reconstruct_cmd->add_option("--roots", reconstruct.roots, "expert roots used by a constrained fit");
  reconstruct_cmd->add_option("--epsilon", reconstruct.epsilon);
  reconstruct_cmd->add_option("--root-prior", reconstruct.root_prior);
  reconstruct_cmd->add_option("--tree-limit", reconstruct.tree_limit);
  reconstruct_cmd->add_option("--tree-index", reconstruct.tree_index);

  auto cmp = CompareArgs{};
  auto* compare_cmd = app.add_subcommand("compare", "PSIS-LOO comparison of two fits");
  compare_cmd->add_option("--a", cmp.a, "first fit directory")->required();
  compare_cmd->add_option("--b", cmp.b, "second fit directory")->required();
  compare_cmd->add_option("--out", cmp.out, "output directory")->required();

  auto sim = SimArgs{};
  auto add_sim_options = [&](CLI::App* cmd) {
    cmd->add_option("--verbs", sim.cfg.num_verbs, "number of verbs")->capture_default_str();
    cmd->add_option("--mu", sim.cfg.mu, "hyper mean of log-rates")->capture_default_str();
    cmd->add_option("--sigma", sim.cfg.sigma, "hyper sd of log-rates")->capture_default_str();
    cmd->add_option("--death", sim.cfg.death, "death rate")->capture_default_str();
    cmd->add_option("--root", sim.root, "root state")->capture_default_str();
    cmd->add_option("--abb-exit-multiplier", sim.cfg.e_abb_exit_multiplier, "E-regime factor on rates out of ABB")
        ->capture_default_str();
  };
  auto* simulate_cmd = app.add_subcommand("simulate", "simulate a character matrix");
  simulate_cmd->add_option("--painted", sim.painted, "painted tree file (first tree used)");
  simulate_cmd->add_option("--tree", sim.tree, "plain tree file (first tree used, all N)");
  simulate_cmd->add_option("--out", sim.out, "output CSV")->required();
  add_sim_options(simulate_cmd);

  auto* validate_cmd = app.add_subcommand("validate", "false-positive study on simulated data");
  validate_cmd->add_option("--painted", sim.painted, "painted trees")->required();
  validate_cmd->add_option("--out", sim.out, "output directory")->required();
  validate_cmd->add_option("--trees", sim.num_trees, "number of trees")->capture_default_str();
  validate_cmd->add_option("--levels", sim.levels, "HDI levels to score");
  add_sim_options(validate_cmd);
  add_sampler_options(validate_cmd, sim.sampler);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*graft_cmd) run_graft(graft, seed);
    if (*paint_cmd) run_paint(paint);
    if (*fit_cmd) run_fit(fit, seed, threads);
    if (*analyze_cmd) run_analyze(analyze);
    if (*reconstruct_cmd) run_reconstruct(reconstruct, seed);
    if (*compare_cmd) run_compare(cmp);
    if (*simulate_cmd) run_simulate(sim, seed);
    if (*validate_cmd) run_validate(sim, seed, threads);
  } catch (const std::exception& e) {
    std::cerr << "stemalt: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
