#include <cmath>

#include "stemalt/analysis.h"

namespace stemalt {

auto quantity_name(RateQuantity q) -> std::string_view {
  switch (q) {
    case RateQuantity::stationary: return "stationary";
    case RateQuantity::entry: return "entry";
    case RateQuantity::exit: return "exit";
  }
  return "?";
}

auto RegimeDiffSummary::interval_at(RateQuantity q, int state, double other_mass) const -> Interval {
  return hdi(samples[static_cast<int>(q)][state], other_mass);
}

namespace {

struct RegimeQuantities {
  Vector5 stationary;
  Vector5 entry;
  Vector5 exit;
};

auto quantities(const RateMatrix& q) -> RegimeQuantities {
  auto out = RegimeQuantities{};
  out.stationary = stationary_distribution(q);
  for (auto i = 0; i != k_num_living; ++i) {
    out.entry(i) = entry_rate(q, i, out.stationary);
    out.exit(i) = exit_rate(q, i);
  }
  return out;
}

}  // namespace

auto regime_differences(const std::vector<std::array<RateMatrix, 2>>& draws, double mass) -> RegimeDiffSummary {
  auto summary = RegimeDiffSummary{};
  summary.mass = mass;
  for (const auto& pair : draws) {
    RegimeQuantities n, e;
    try {
      n = quantities(pair[static_cast<int>(Regime::N)]);
      e = quantities(pair[static_cast<int>(Regime::E)]);
    } catch (const ReducibleError&) {
      ++summary.excluded_draws;
      continue;
    }
    for (auto i = 0; i != k_num_living; ++i) {
      summary.samples[0][i].push_back(e.stationary(i) - n.stationary(i));
      summary.samples[1][i].push_back(e.entry(i) - n.entry(i));
      summary.samples[2][i].push_back(e.exit(i) - n.exit(i));
    }
    ++summary.used_draws;
  }
  for (auto q = 0; q != k_num_quantities; ++q) {
    for (auto i = 0; i != k_num_living; ++i) {
      // Too few usable draws for an interval: report the whole line, which is
      // never decisive.
      summary.intervals[q][i] = summary.used_draws >= k_min_hdi_samples
                                    ? hdi(summary.samples[q][i], mass)
                                    : Interval{-INFINITY, INFINITY};
    }
  }
  return summary;
}

auto regime_differences(const PosteriorPool& pool, double mass) -> RegimeDiffSummary {
  auto draws = std::vector<std::array<RateMatrix, 2>>{};
  draws.reserve(pool.num_draws());
  auto rates = LivingRates{};
  for (auto d = 0; d != pool.num_draws(); ++d) {
    auto death = std::exp(pool.draws(d, 0));
    auto pair = std::array<RateMatrix, 2>{};
    for (auto r = 0; r != k_num_regimes; ++r) {
      for (auto t = 0; t != k_num_transitions; ++t) rates[t] = std::exp(pool.draws(d, 1 + r * k_num_transitions + t));
      pair[r] = RateMatrix::build(rates, death);
    }
    draws.push_back(pair);
  }
  return regime_differences(draws, mass);
}

}  // namespace stemalt
