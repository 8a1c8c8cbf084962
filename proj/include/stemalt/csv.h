#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace stemalt {

using CsvRow = std::vector<std::string>;

// Minimal CSV: comma separated, optional double-quoted fields ("" escapes a
// quote), surrounding whitespace trimmed from unquoted fields.  Blank lines
// and lines starting with '#' are skipped.
auto parse_csv(std::string_view text) -> std::vector<CsvRow>;
auto read_csv(const std::string& path) -> std::vector<CsvRow>;

auto csv_field(std::string_view value) -> std::string;
auto read_text_file(const std::string& path) -> std::string;
auto write_text_file(const std::string& path, std::string_view contents) -> void;

}  // namespace stemalt
