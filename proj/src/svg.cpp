#include "stemalt/svg.h"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace stemalt {

namespace {

auto fmt(double x) -> std::string {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

auto median(std::vector<double> x) -> double {
  if (x.empty()) return 0.0;
  auto mid = x.begin() + static_cast<long>(x.size() / 2);
  std::nth_element(x.begin(), mid, x.end());
  return *mid;
}

}  // namespace

auto svg_interval_plot(const RegimeDiffSummary& summary, RateQuantity quantity) -> std::string {
  constexpr double width = 480, row = 36, left = 60, right = 20, top = 30;
  auto q = static_cast<int>(quantity);
  auto lo = 0.0;
  auto hi = 0.0;
  for (auto s = 0; s != k_num_living; ++s) {
    lo = std::min(lo, summary.intervals[q][s].lo);
    hi = std::max(hi, summary.intervals[q][s].hi);
  }
  if (hi - lo <= 0.0) hi = lo + 1.0;
  auto pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto x = [&](double v) { return left + (v - lo) / (hi - lo) * (width - left - right); };
  auto height = top + row * k_num_living + 30;

  auto out = std::ostringstream{};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<text x=\"" << left << "\" y=\"18\">" << quantity_name(quantity) << " difference E - N ("
      << fmt(100 * summary.mass) << "% HDI)</text>\n";
  out << "<line x1=\"" << fmt(x(0)) << "\" y1=\"" << top << "\" x2=\"" << fmt(x(0)) << "\" y2=\""
      << top + row * k_num_living << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  for (auto s = 0; s != k_num_living; ++s) {
    const auto& iv = summary.intervals[q][s];
    auto y = top + row * (s + 0.5);
    auto colour = iv.excludes_zero() ? "#b2182b" : "#555";
    out << "<text x=\"8\" y=\"" << fmt(y + 4) << "\">" << state_name(s) << "</text>\n";
    out << "<line x1=\"" << fmt(x(iv.lo)) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(x(iv.hi)) << "\" y2=\""
        << fmt(y) << "\" stroke=\"" << colour << "\" stroke-width=\"4\"/>\n";
    out << "<circle cx=\"" << fmt(x(median(summary.samples[q][s]))) << "\" cy=\"" << fmt(y)
        << "\" r=\"4\" fill=\"white\" stroke=\"" << colour << "\"/>\n";
  }
  auto axis_y = top + row * k_num_living + 16;
  out << "<text x=\"" << fmt(x(lo)) << "\" y=\"" << axis_y << "\">" << fmt(lo) << "</text>\n";
  out << "<text x=\"" << fmt(x(hi) - 30) << "\" y=\"" << axis_y << "\">" << fmt(hi) << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace stemalt
