#include "stemalt/validate.h"

#include <algorithm>
#include <cmath>

namespace stemalt {

auto FalsePositiveReport::rate_at(double level) const -> double {
  for (auto i = 0u; i != levels.size(); ++i) {
    if (std::abs(levels[i] - level) < 1e-12) return rates[i];
  }
  throw Error{"study has no HDI level " + std::to_string(level)};
}

auto score_stationary_cells(const RegimeDiffSummary& summary, int tree, const std::vector<double>& levels)
    -> std::vector<StudyCell> {
  auto cells = std::vector<StudyCell>{};
  for (auto level : levels) {
    for (auto s = 0; s != k_num_living; ++s) {
      auto cell = StudyCell{tree, s, level, summary.interval_at(RateQuantity::stationary, s, level), false};
      cell.decisive = cell.interval.excludes_zero();
      cells.push_back(cell);
    }
  }
  return cells;
}

auto false_positive_study(const SimConfig& cfg, const std::vector<PaintedTree>& trees, const SamplerConfig& sampler)
    -> FalsePositiveReport {
  cfg.validate();
  if (trees.empty()) throw Error{"false_positive_study: no trees"};
  auto report = FalsePositiveReport{};
  report.levels = cfg.hdi_levels;
  for (auto t = 0; t != static_cast<int>(trees.size()); ++t) {
    auto tree_cfg = cfg;
    tree_cfg.seed = cfg.seed * 1000003u + static_cast<std::uint64_t>(t);
    auto data = simulate_dataset(tree_cfg, trees[t]);
    auto tree_sampler = sampler;
    tree_sampler.seed = sampler.seed + static_cast<std::uint64_t>(t);
    auto models = std::vector<PosteriorModel>{};
    models.emplace_back(ModelKind::hierarchical, data, trees[t], RootPrior::uniform_all);
    auto pool = sample(models, tree_sampler);
    auto worst = 1.0;
    for (auto c = 0u; c != pool.param_names.size(); ++c) {
      const auto& name = pool.param_names[c];
      if (name == "log_delta" || name.starts_with("mu[")) worst = std::max(worst, pool.rhat[c]);
    }
    report.max_rhat.push_back(worst);
    for (const auto& w : pool.warnings) report.warnings.push_back("tree " + std::to_string(t) + ": " + w);
    auto summary = regime_differences(pool);
    if (summary.excluded_draws > 0) {
      report.warnings.push_back("tree " + std::to_string(t) + ": " + std::to_string(summary.excluded_draws) +
                                " draws excluded as reducible");
    }
    auto cells = score_stationary_cells(summary, t, cfg.hdi_levels);
    report.cells.insert(report.cells.end(), cells.begin(), cells.end());
  }
  for (auto level : report.levels) {
    auto total = 0;
    auto decisive = 0;
    for (const auto& c : report.cells) {
      if (c.level != level) continue;
      ++total;
      if (c.decisive) ++decisive;
    }
    report.rates.push_back(total ? static_cast<double>(decisive) / total : 0.0);
  }
  return report;
}

}  // namespace stemalt
