#include "stemalt/character_matrix.h"

#include <set>
#include <sstream>

#include "stemalt/csv.h"

namespace stemalt {

CharacterMatrix::CharacterMatrix(std::vector<std::string> verbs, std::vector<std::string> taxa,
                                 std::vector<std::vector<int>> cells)
    : verbs_{std::move(verbs)}, taxa_{std::move(taxa)}, cells_{std::move(cells)} {
  if (cells_.size() != verbs_.size()) throw Error{"character matrix: one row per verb required"};
  if (std::set<std::string>(taxa_.begin(), taxa_.end()).size() != taxa_.size()) {
    throw Error{"character matrix: duplicate taxon column"};
  }
  if (std::set<std::string>(verbs_.begin(), verbs_.end()).size() != verbs_.size()) {
    throw Error{"character matrix: duplicate verb"};
  }
  for (auto v = 0u; v != cells_.size(); ++v) {
    if (cells_[v].size() != taxa_.size()) throw Error{"character matrix: ragged row for verb '" + verbs_[v] + "'"};
    auto observed = false;
    for (auto c : cells_[v]) {
      if (c != k_missing && (c < 0 || c >= k_num_states)) throw Error{"character matrix: invalid state index"};
      observed = observed || c != k_missing;
    }
    if (!observed) throw Error{"character matrix: verb '" + verbs_[v] + "' has no observed value"};
  }
}

auto CharacterMatrix::verb_index(std::string_view verb) const -> int {
  for (auto v = 0; v != num_verbs(); ++v) {
    if (verbs_[v] == verb) return v;
  }
  throw Error{"unknown verb '" + std::string{verb} + "'"};
}

auto CharacterMatrix::taxon_index(std::string_view taxon) const -> int {
  for (auto t = 0; t != num_taxa(); ++t) {
    if (taxa_[t] == taxon) return t;
  }
  return -1;
}

auto CharacterMatrix::subset(const std::vector<int>& verb_indices) const -> CharacterMatrix {
  auto verbs = std::vector<std::string>{};
  auto cells = std::vector<std::vector<int>>{};
  for (auto v : verb_indices) {
    verbs.push_back(verbs_.at(v));
    cells.push_back(cells_.at(v));
  }
  return {std::move(verbs), taxa_, std::move(cells)};
}

auto CharacterMatrix::with_column(std::string taxon, std::vector<int> states) const -> CharacterMatrix {
  if (std::ssize(states) != num_verbs()) throw Error{"character matrix: new column has wrong length"};
  auto taxa = taxa_;
  taxa.push_back(std::move(taxon));
  auto cells = cells_;
  for (auto v = 0; v != num_verbs(); ++v) cells[v].push_back(states[v]);
  return {verbs_, std::move(taxa), std::move(cells)};
}

auto parse_character_csv(std::string_view text) -> CharacterMatrix {
  auto rows = parse_csv(text);
  if (rows.empty()) throw Error{"character matrix: empty file"};
  const auto& header = rows.front();
  if (header.size() < 2 || header[0] != "verb") throw Error{"character matrix: header must be `verb,taxon1,...`"};
  auto taxa = std::vector<std::string>(header.begin() + 1, header.end());
  auto verbs = std::vector<std::string>{};
  auto cells = std::vector<std::vector<int>>{};
  for (auto r = 1u; r != rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw Error{"character matrix: row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                  " fields, expected " + std::to_string(header.size())};
    }
    verbs.push_back(row[0]);
    auto states = std::vector<int>{};
    for (auto k = 1u; k != row.size(); ++k) {
      if (row[k] == "?") {
        states.push_back(k_missing);
        continue;
      }
      auto s = parse_state(row[k]);
      if (!s) throw Error{"character matrix: unknown state '" + row[k] + "' for verb '" + row[0] + "'"};
      states.push_back(static_cast<int>(*s));
    }
    cells.push_back(std::move(states));
  }
  return {std::move(verbs), std::move(taxa), std::move(cells)};
}

auto read_character_csv(const std::string& path) -> CharacterMatrix {
  try {
    return parse_character_csv(read_text_file(path));
  } catch (const Error& e) {
    throw Error{path + ": " + e.what()};
  }
}

auto write_character_csv(const CharacterMatrix& data) -> std::string {
  auto out = std::ostringstream{};
  out << "verb";
  for (const auto& t : data.taxa()) out << ',' << csv_field(t);
  out << '\n';
  for (auto v = 0; v != data.num_verbs(); ++v) {
    out << csv_field(data.verbs()[v]);
    for (auto c : data.row(v)) out << ',' << (c == k_missing ? std::string_view{"?"} : state_name(c));
    out << '\n';
  }
  return out.str();
}

auto RootStates::state_of(std::string_view verb) const -> int {
  for (auto k = 0u; k != verbs.size(); ++k) {
    if (verbs[k] == verb) return states[k];
  }
  throw Error{"no root state for verb '" + std::string{verb} + "'"};
}

auto read_root_states_csv(const std::string& path) -> RootStates {
  auto rows = read_csv(path);
  auto roots = RootStates{};
  for (auto k = 0u; k != rows.size(); ++k) {
    const auto& row = rows[k];
    if (row.size() != 2) throw Error{path + ": expected two columns `verb,state`"};
    if (k == 0 && row[0] == "verb") continue;
    auto s = parse_state(row[1]);
    if (!s || *s == PatternState::DEAD) throw Error{path + ": invalid root state '" + row[1] + "'"};
    roots.verbs.push_back(row[0]);
    roots.states.push_back(static_cast<int>(*s));
  }
  return roots;
}

auto write_root_states_csv(const RootStates& roots) -> std::string {
  auto out = std::ostringstream{};
  out << "verb,state\n";
  for (auto k = 0u; k != roots.verbs.size(); ++k) out << csv_field(roots.verbs[k]) << ',' << state_name(roots.states[k]) << '\n';
  return out.str();
}

}  // namespace stemalt
