#pragma once

#include <string>

#include "stemalt/analysis.h"

namespace stemalt {

// Horizontal HDI bars with posterior medians, one row per living state, for
// one quantity of a regime-difference summary.
auto svg_interval_plot(const RegimeDiffSummary& summary, RateQuantity quantity) -> std::string;

}  // namespace stemalt
