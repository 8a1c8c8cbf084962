#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "stemalt/mcmc.h"

namespace stemalt {

// Columnar binary draw store.  `draws.bin` is a sequence of chunks of at most
// k_chunk_draws draws; each chunk is a little-endian uint32 draw count
// followed by, column by column, the parameter values, the per-verb
// log-likelihoods and the log posterior (all float64), then tree, chain and
// iteration (int32).  `manifest.json` names the columns.
inline constexpr int k_chunk_draws = 500;

struct StoreLayout {
  ModelKind kind = ModelKind::flat;
  std::vector<std::string> param_names;
  std::vector<std::string> verbs;
  int num_trees = 0;
  int chains = 0;
};

class DrawStoreWriter {
 public:
  DrawStoreWriter(const std::string& directory, StoreLayout layout);
  ~DrawStoreWriter();
  DrawStoreWriter(const DrawStoreWriter&) = delete;
  auto operator=(const DrawStoreWriter&) -> DrawStoreWriter& = delete;

  auto append(const DrawRecord& record) -> void;
  // Flushes the last chunk and writes the manifest.  Called by the destructor
  // if needed, but errors are only reported from an explicit call.
  auto close() -> void;

 private:
  std::string directory_;
  StoreLayout layout_;
  std::ofstream out_;
  std::vector<DrawRecord> pending_meta_;
  std::vector<std::vector<double>> pending_params_;
  std::vector<std::vector<double>> pending_pointwise_;
  long total_ = 0;
  int chunks_ = 0;
  bool closed_ = false;

  auto flush() -> void;
};

auto write_draw_store(const PosteriorPool& pool, const std::string& directory) -> void;
// Reads draws back into a pool; R-hat is recomputed.
auto read_draw_store(const std::string& directory) -> PosteriorPool;

}  // namespace stemalt
