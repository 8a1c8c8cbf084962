#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "stemalt/ctmc.h"

namespace stemalt {

inline constexpr int k_missing = -1;

// Verbs x taxa grid of observed patterns.  Cells hold a state index or
// k_missing.  Every verb has at least one observed cell.
class CharacterMatrix {
 public:
  CharacterMatrix() = default;
  CharacterMatrix(std::vector<std::string> verbs, std::vector<std::string> taxa, std::vector<std::vector<int>> cells);

  auto num_verbs() const -> int { return static_cast<int>(verbs_.size()); }
  auto num_taxa() const -> int { return static_cast<int>(taxa_.size()); }
  auto verbs() const -> const std::vector<std::string>& { return verbs_; }
  auto taxa() const -> const std::vector<std::string>& { return taxa_; }
  auto cell(int verb, int taxon) const -> int { return cells_[verb][taxon]; }
  auto row(int verb) const -> const std::vector<int>& { return cells_[verb]; }

  auto verb_index(std::string_view verb) const -> int;    // throws if absent
  auto taxon_index(std::string_view taxon) const -> int;  // -1 if absent

  auto subset(const std::vector<int>& verb_indices) const -> CharacterMatrix;
  // Copy with one extra taxon column.
  auto with_column(std::string taxon, std::vector<int> states) const -> CharacterMatrix;

 private:
  std::vector<std::string> verbs_;
  std::vector<std::string> taxa_;
  std::vector<std::vector<int>> cells_;
};

// CSV with header `verb,taxon1,...,taxonK`; cells in {AAA,AAB,ABA,ABB,ABC,DEAD,?}.
auto read_character_csv(const std::string& path) -> CharacterMatrix;
auto parse_character_csv(std::string_view text) -> CharacterMatrix;
auto write_character_csv(const CharacterMatrix& data) -> std::string;

// Per-verb expert root states: CSV `verb,state`.
struct RootStates {
  std::vector<std::string> verbs;
  std::vector<int> states;
  auto state_of(std::string_view verb) const -> int;  // throws if absent
};
auto read_root_states_csv(const std::string& path) -> RootStates;
auto write_root_states_csv(const RootStates& roots) -> std::string;

}  // namespace stemalt
