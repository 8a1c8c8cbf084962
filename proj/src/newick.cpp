#include "stemalt/newick.h"

#include <charconv>
#include <fstream>
#include <sstream>

namespace stemalt {

NewickError::NewickError(const std::string& what, std::size_t offset)
    : Error{"newick: " + what + " at byte " + std::to_string(offset)}, offset_{offset} {}

auto format_double(double x) -> std::string {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, end};
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_{text} {}

  auto parse() -> TimedTree {
    skip_blank();
    auto root = parse_subtree(k_no_node);
    skip_blank();
    expect(';');
    skip_blank();
    if (pos_ != text_.size()) fail("trailing characters after ';'");
    return TimedTree{std::move(nodes_), root};
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<Node> nodes_;

  [[noreturn]] auto fail(const std::string& what) const -> void { throw NewickError{what, pos_}; }

  auto peek() const -> char { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  auto at_end() const -> bool { return pos_ >= text_.size(); }

  auto expect(char c) -> void {
    if (peek() != c) {
      if (at_end()) fail(std::string{"unexpected end of input, expected '"} + c + "'");
      fail(std::string{"expected '"} + c + "', found '" + peek() + "'");
    }
    ++pos_;
  }

  // Skips whitespace and comments; returns the last '&' comment seen, if any.
  auto skip_blank() -> std::string {
    auto annotation = std::string{};
    while (!at_end()) {
      auto c = peek();
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos_;
      } else if (c == '[') {
        auto start = pos_;
        auto close = text_.find(']', pos_);
        if (close == std::string_view::npos) {
          pos_ = start;
          fail("unterminated comment");
        }
        auto body = text_.substr(pos_ + 1, close - pos_ - 1);
        if (!body.empty() && body.front() == '&') annotation = std::string{body};
        pos_ = close + 1;
      } else {
        break;
      }
    }
    return annotation;
  }

  auto parse_label() -> std::string {
    if (peek() == '\'') {
      ++pos_;
      auto label = std::string{};
      while (true) {
        if (at_end()) fail("unterminated quoted label");
        auto c = text_[pos_++];
        if (c == '\'') {
          if (peek() == '\'') {
            label += '\'';
            ++pos_;
          } else {
            break;
          }
        } else {
          label += c;
        }
      }
      return label;
    }
    auto start = pos_;
    while (!at_end()) {
      auto c = peek();
      if (c == '(' || c == ')' || c == ',' || c == ':' || c == ';' || c == '[' || c == ']' ||
          c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\'') {
        break;
      }
      ++pos_;
    }
    return std::string{text_.substr(start, pos_ - start)};
  }

  auto parse_length() -> double {
    auto start = pos_;
    auto value = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
    if (ec != std::errc{}) fail("malformed branch length");
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    if (value < 0.0) {
      pos_ = start;
      fail("negative branch length");
    }
    return value;
  }

  auto parse_subtree(Node_index parent) -> Node_index {
    auto index = static_cast<Node_index>(nodes_.size());
    nodes_.push_back(Node{});
    nodes_[index].parent = parent;

    if (peek() == '(') {
      ++pos_;
      while (true) {
        skip_blank();
        auto child = parse_subtree(index);
        nodes_[index].children.push_back(child);
        skip_blank();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        if (peek() == ')') {
          ++pos_;
          break;
        }
        if (at_end()) fail("unbalanced parenthesis: unexpected end of input");
        if (peek() == ';') fail("unbalanced parenthesis: ';' before closing ')'");
        fail(std::string{"expected ',' or ')', found '"} + peek() + "'");
      }
      skip_blank();
    }
    nodes_[index].label = parse_label();
    auto annotation = skip_blank();
    auto has_length = false;
    if (peek() == ':') {
      ++pos_;
      skip_blank();
      nodes_[index].length = parse_length();
      has_length = true;
      auto after = skip_blank();
      if (!after.empty()) annotation = after;
    }
    nodes_[index].annotation = annotation;
    if (nodes_[index].children.empty() && nodes_[index].label.empty()) fail("tip without a label");
    if (parent != k_no_node && !has_length) fail("missing branch length");
    return index;
  }
};

auto needs_quotes(const std::string& label) -> bool {
  for (auto c : label) {
    switch (c) {
      case '(': case ')': case ',': case ':': case ';': case '[': case ']':
      case ' ': case '\t': case '\n': case '\r': case '\'':
        return true;
      default:
        break;
    }
  }
  return false;
}

auto write_label(std::ostringstream& out, const std::string& label) -> void {
  if (!needs_quotes(label)) {
    out << label;
    return;
  }
  out << '\'';
  for (auto c : label) {
    if (c == '\'') out << '\'';
    out << c;
  }
  out << '\'';
}

auto write_subtree(std::ostringstream& out, const TimedTree& tree, Node_index i) -> void {
  const auto& node = tree.at(i);
  if (!node.children.empty()) {
    out << '(';
    for (auto k = 0u; k != node.children.size(); ++k) {
      if (k != 0) out << ',';
      write_subtree(out, tree, node.children[k]);
    }
    out << ')';
  }
  write_label(out, node.label);
  if (i != tree.root() || node.length != 0.0) out << ':' << format_double(node.length);
  if (!node.annotation.empty()) out << '[' << node.annotation << ']';
}

}  // namespace

auto parse_newick(std::string_view text) -> TimedTree {
  auto parser = Parser{text};
  return parser.parse();
}

auto write_newick(const TimedTree& tree) -> std::string {
  auto out = std::ostringstream{};
  write_subtree(out, tree, tree.root());
  out << ';';
  return out.str();
}

auto read_tree_sample(const std::string& path) -> TreeSample {
  auto in = std::ifstream{path};
  if (!in) throw Error{"cannot open tree file '" + path + "'"};
  auto sample = TreeSample{};
  sample.provenance = path;
  auto line = std::string{};
  auto line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      sample.trees.push_back(parse_newick(line));
    } catch (const Error& e) {
      throw Error{path + ":" + std::to_string(line_no) + ": " + e.what()};
    }
  }
  validate_tree_sample(sample);
  return sample;
}

auto write_tree_sample(const std::string& path, const TreeSample& sample) -> void {
  auto out = std::ofstream{path};
  if (!out) throw Error{"cannot write tree file '" + path + "'"};
  for (const auto& tree : sample.trees) out << write_newick(tree) << '\n';
}

}  // namespace stemalt
