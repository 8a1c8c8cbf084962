#include <charconv>
#include <cmath>

#include "stemalt/csv.h"
#include "stemalt/newick.h"
#include "stemalt/regime.h"

namespace stemalt {

namespace {

constexpr std::string_view k_prefix = "&regime=";

auto format_segments(const std::vector<RegimeSegment>& segs) -> std::string {
  auto out = std::string{k_prefix};
  for (auto k = 0u; k != segs.size(); ++k) {
    if (k != 0) out += ',';
    out += regime_name(segs[k].regime);
    out += ':';
    out += format_double(segs[k].length);
  }
  return out;
}

auto parse_segments(std::string_view annotation) -> std::vector<RegimeSegment> {
  if (!annotation.starts_with(k_prefix)) throw Error{"painted newick: missing regime annotation"};
  auto body = annotation.substr(k_prefix.size());
  auto segs = std::vector<RegimeSegment>{};
  while (!body.empty()) {
    auto comma = body.find(',');
    auto item = body.substr(0, comma);
    auto colon = item.find(':');
    if (colon == std::string_view::npos) throw Error{"painted newick: malformed segment '" + std::string{item} + "'"};
    auto regime = parse_regime(item.substr(0, colon));
    auto value = 0.0;
    auto digits = item.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
      throw Error{"painted newick: malformed segment length '" + std::string{digits} + "'"};
    }
    segs.push_back({value, regime});
    if (comma == std::string_view::npos) break;
    body = body.substr(comma + 1);
  }
  return segs;
}

}  // namespace

auto write_painted_newick(const PaintedTree& painted) -> std::string {
  auto nodes = painted.tree().nodes();
  for (auto n = 0; n != painted.tree().size(); ++n) {
    nodes[n].annotation = n == painted.tree().root() ? std::string{} : format_segments(painted.segments(n));
  }
  return write_newick(TimedTree{std::move(nodes), painted.tree().root()});
}

namespace {

auto painted_from_annotations(const TimedTree& tree) -> PaintedTree {
  auto segments = std::vector<std::vector<RegimeSegment>>(tree.size());
  for (auto n = 0; n != tree.size(); ++n) {
    if (n == tree.root()) continue;
    segments[n] = parse_segments(tree.at(n).annotation);
  }
  auto nodes = tree.nodes();
  for (auto& node : nodes) node.annotation.clear();
  return PaintedTree{TimedTree{std::move(nodes), tree.root()}, std::move(segments)};
}

}  // namespace

auto parse_painted_newick(std::string_view text) -> PaintedTree { return painted_from_annotations(parse_newick(text)); }

auto read_painted_trees(const std::string& path) -> std::vector<PaintedTree> {
  auto out = std::vector<PaintedTree>{};
  for (const auto& tree : read_tree_sample(path).trees) out.push_back(painted_from_annotations(tree));
  return out;
}

auto write_painted_trees(const std::string& path, const std::vector<PaintedTree>& trees) -> void {
  auto text = std::string{};
  for (const auto& t : trees) text += write_painted_newick(t) + "\n";
  write_text_file(path, text);
}

}  // namespace stemalt
