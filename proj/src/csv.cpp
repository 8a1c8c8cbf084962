#include "stemalt/csv.h"

#include <fstream>
#include <sstream>

#include "stemalt/tree.h"

namespace stemalt {

namespace {

auto trim(std::string_view s) -> std::string_view {
  auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

auto parse_line(std::string_view line) -> CsvRow {
  auto row = CsvRow{};
  auto pos = std::size_t{0};
  while (true) {
    auto rest = line.substr(pos);
    auto lead = rest.find_first_not_of(" \t");
    if (lead != std::string_view::npos && rest[lead] == '"') {
      auto field = std::string{};
      auto i = pos + lead + 1;
      while (true) {
        if (i >= line.size()) throw Error{"csv: unterminated quoted field"};
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field += '"';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        field += line[i++];
      }
      row.push_back(std::move(field));
      auto comma = line.find(',', i);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    } else {
      auto comma = line.find(',', pos);
      auto end = comma == std::string_view::npos ? line.size() : comma;
      row.emplace_back(trim(line.substr(pos, end - pos)));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
  }
  return row;
}

}  // namespace

auto parse_csv(std::string_view text) -> std::vector<CsvRow> {
  auto rows = std::vector<CsvRow>{};
  auto start = std::size_t{0};
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    rows.push_back(parse_line(line));
  }
  return rows;
}

auto read_text_file(const std::string& path) -> std::string {
  auto in = std::ifstream{path, std::ios::binary};
  if (!in) throw Error{"cannot open '" + path + "'"};
  auto buffer = std::ostringstream{};
  buffer << in.rdbuf();
  return buffer.str();
}

auto write_text_file(const std::string& path, std::string_view contents) -> void {
  auto out = std::ofstream{path, std::ios::binary};
  if (!out) throw Error{"cannot write '" + path + "'"};
  out << contents;
}

auto read_csv(const std::string& path) -> std::vector<CsvRow> { return parse_csv(read_text_file(path)); }

auto csv_field(std::string_view value) -> std::string {
  if (value.find_first_of(",\"\n") == std::string_view::npos) return std::string{value};
  auto out = std::string{"\""};
  for (auto c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace stemalt
