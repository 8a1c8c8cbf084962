#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "stemalt/tree.h"

namespace stemalt {

class NewickError : public Error {
 public:
  NewickError(const std::string& what, std::size_t offset);
  auto offset() const -> std::size_t { return offset_; }

 private:
  std::size_t offset_;
};

// Parses one tree terminated by ';'.  Labels may be single-quoted ('' escapes a
// quote); square-bracket comments are skipped, except that a comment starting
// with '&' directly after a node is kept as that node's annotation.  Every
// non-root node must carry a branch length.
auto parse_newick(std::string_view text) -> TimedTree;

// Writes lengths in shortest round-trip form; annotations are re-emitted.
auto write_newick(const TimedTree& tree) -> std::string;

// One tree per non-empty line; lines starting with '#' are ignored.
auto read_tree_sample(const std::string& path) -> TreeSample;
auto write_tree_sample(const std::string& path, const TreeSample& sample) -> void;

// Shortest decimal representation that parses back to the same double.
auto format_double(double x) -> std::string;

}  // namespace stemalt
