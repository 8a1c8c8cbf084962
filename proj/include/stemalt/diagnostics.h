#pragma once

#include <span>
#include <vector>

namespace stemalt {

struct PosteriorPool;

struct RhatResult {
  double value = 1.0;
  bool zero_variance = false;
};

// Split-R-hat: each chain is cut in half and the halves are treated as
// separate chains.  Needs at least two chains of at least ten draws each;
// throws Error otherwise.  A parameter with no variance at all reports 1 and
// sets zero_variance.
auto split_rhat(const std::vector<std::vector<double>>& chains) -> RhatResult;

// R-hat of one parameter column, computed over the chains of each tree and
// reduced to the worst tree.
auto rhat(const PosteriorPool& pool, int column) -> RhatResult;

// rhat() for every column; NaN when fewer than two chains were run.
auto rhat_all(const PosteriorPool& pool) -> std::vector<double>;

}  // namespace stemalt
