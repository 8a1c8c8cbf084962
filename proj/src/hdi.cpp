#include <algorithm>
#include <cmath>

#include "stemalt/analysis.h"

namespace stemalt {

auto hdi(std::span<const double> samples, double mass) -> Interval {
  if (!(mass > 0.0 && mass < 1.0)) throw Error{"hdi: mass must be in (0, 1)"};
  auto n = samples.size();
  if (n < static_cast<std::size_t>(k_min_hdi_samples)) throw Error{"hdi: need at least 10 samples, got " + std::to_string(n)};
  auto sorted = std::vector<double>(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  // The small slack keeps e.g. 0.95 * 100 from rounding up to 96.
  auto window = static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n) - 1e-9));
  window = std::clamp<std::size_t>(window, 1, n);
  auto best = std::size_t{0};
  auto best_width = sorted[window - 1] - sorted[0];
  for (auto start = std::size_t{1}; start + window <= n; ++start) {
    auto width = sorted[start + window - 1] - sorted[start];
    if (width < best_width) {
      best_width = width;
      best = start;
    }
  }
  return {sorted[best], sorted[best + window - 1]};
}

}  // namespace stemalt
