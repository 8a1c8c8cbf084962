#pragma once

#include <string>
#include <vector>

#include "stemalt/analysis.h"
#include "stemalt/mcmc.h"
#include "stemalt/simulate.h"

namespace stemalt {

// One scored (tree, living state, HDI level) cell of the study.
struct StudyCell {
  int tree = 0;
  int state = 0;
  double level = 0.0;
  Interval interval;
  bool decisive = false;
};

struct FalsePositiveReport {
  std::vector<double> levels;
  std::vector<double> rates;  // fraction of decisive cells per level
  std::vector<StudyCell> cells;
  std::vector<double> max_rhat;  // per tree, over mu and log_delta
  std::vector<std::string> warnings;

  auto rate_at(double level) const -> double;
};

// Scores the Delta-stationary HDIs of one fitted tree at each level.
auto score_stationary_cells(const RegimeDiffSummary& summary, int tree, const std::vector<double>& levels)
    -> std::vector<StudyCell>;

// For every painted tree: simulate cfg.num_verbs verbs on it (seeded by
// cfg.seed and the tree index), fit the two-regime hierarchical model on that
// tree alone and score the Delta-stationary HDIs.
auto false_positive_study(const SimConfig& cfg, const std::vector<PaintedTree>& trees, const SamplerConfig& sampler)
    -> FalsePositiveReport;

}  // namespace stemalt
