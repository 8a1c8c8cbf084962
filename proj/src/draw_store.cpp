#include "stemalt/draw_store.h"

#include <bit>
#include <filesystem>

#include <json.hpp>

#include "stemalt/csv.h"
#include "stemalt/diagnostics.h"

namespace stemalt {

namespace {

static_assert(std::endian::native == std::endian::little, "draw store assumes a little-endian host");

template <typename T>
auto put(std::ofstream& out, T value) -> void {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
auto get(std::ifstream& in) -> T {
  auto value = T{};
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) throw Error{"draw store: truncated draws.bin"};
  return value;
}

}  // namespace

DrawStoreWriter::DrawStoreWriter(const std::string& directory, StoreLayout layout)
    : directory_{directory}, layout_{std::move(layout)} {
  std::filesystem::create_directories(directory_);
  out_.open(directory_ + "/draws.bin", std::ios::binary | std::ios::trunc);
  if (!out_) throw Error{"draw store: cannot write " + directory_ + "/draws.bin"};
}

DrawStoreWriter::~DrawStoreWriter() {
  if (closed_) return;
  try {
    close();
  } catch (...) {
  }
}

auto DrawStoreWriter::append(const DrawRecord& record) -> void {
  if (closed_) throw Error{"draw store: append after close"};
  if (record.params->size() != layout_.param_names.size() || record.pointwise->size() != layout_.verbs.size()) {
    throw Error{"draw store: record does not match the store layout"};
  }
  pending_meta_.push_back(record);
  pending_params_.push_back(*record.params);
  pending_pointwise_.push_back(*record.pointwise);
  if (static_cast<int>(pending_meta_.size()) == k_chunk_draws) flush();
}

auto DrawStoreWriter::flush() -> void {
  if (pending_meta_.empty()) return;
  auto n = pending_meta_.size();
  put<std::uint32_t>(out_, static_cast<std::uint32_t>(n));
  for (auto c = 0u; c != layout_.param_names.size(); ++c) {
    for (auto d = 0u; d != n; ++d) put<double>(out_, pending_params_[d][c]);
  }
  for (auto c = 0u; c != layout_.verbs.size(); ++c) {
    for (auto d = 0u; d != n; ++d) put<double>(out_, pending_pointwise_[d][c]);
  }
  for (const auto& m : pending_meta_) put<double>(out_, m.log_posterior);
  for (const auto& m : pending_meta_) put<std::int32_t>(out_, m.provenance.tree);
  for (const auto& m : pending_meta_) put<std::int32_t>(out_, m.provenance.chain);
  for (const auto& m : pending_meta_) put<std::int32_t>(out_, m.provenance.iteration);
  out_.flush();
  if (!out_) throw Error{"draw store: write failed"};
  total_ += static_cast<long>(n);
  ++chunks_;
  pending_meta_.clear();
  pending_params_.clear();
  pending_pointwise_.clear();
}

auto DrawStoreWriter::close() -> void {
  if (closed_) return;
  closed_ = true;
  flush();
  out_.close();
  auto manifest = nlohmann::ordered_json{};
  manifest["format"] = "stemalt-draws-v1";
  manifest["model"] = std::string{model_kind_name(layout_.kind)};
  manifest["num_draws"] = total_;
  manifest["num_chunks"] = chunks_;
  manifest["chunk_draws"] = k_chunk_draws;
  manifest["num_trees"] = layout_.num_trees;
  manifest["chains"] = layout_.chains;
  manifest["parameters"] = layout_.param_names;
  manifest["verbs"] = layout_.verbs;
  write_text_file(directory_ + "/manifest.json", manifest.dump(2) + "\n");
}

auto write_draw_store(const PosteriorPool& pool, const std::string& directory) -> void {
  auto writer = DrawStoreWriter{directory, {pool.kind, pool.param_names, pool.verbs, pool.num_trees, pool.chains}};
  auto params = std::vector<double>(pool.param_names.size());
  auto pointwise = std::vector<double>(pool.verbs.size());
  for (auto d = 0; d != pool.num_draws(); ++d) {
    for (auto c = 0u; c != params.size(); ++c) params[c] = pool.draws(d, c);
    for (auto c = 0u; c != pointwise.size(); ++c) pointwise[c] = pool.pointwise(d, c);
    writer.append({pool.provenance[d], pool.log_posterior[d], &params, &pointwise});
  }
  writer.close();
}

auto read_draw_store(const std::string& directory) -> PosteriorPool {
  auto manifest = nlohmann::json::parse(read_text_file(directory + "/manifest.json"));
  if (manifest.value("format", "") != "stemalt-draws-v1") throw Error{"draw store: unknown format in " + directory};
  auto pool = PosteriorPool{};
  pool.kind = parse_model_kind(manifest.at("model").get<std::string>());
  pool.param_names = manifest.at("parameters").get<std::vector<std::string>>();
  pool.verbs = manifest.at("verbs").get<std::vector<std::string>>();
  pool.num_trees = manifest.at("num_trees").get<int>();
  pool.chains = manifest.at("chains").get<int>();
  auto total = manifest.at("num_draws").get<long>();
  auto p = static_cast<Eigen::Index>(pool.param_names.size());
  auto v = static_cast<Eigen::Index>(pool.verbs.size());
  pool.draws.resize(total, p);
  pool.pointwise.resize(total, v);
  pool.log_posterior.resize(total);
  pool.provenance.resize(total);

  auto in = std::ifstream{directory + "/draws.bin", std::ios::binary};
  if (!in) throw Error{"draw store: cannot read " + directory + "/draws.bin"};
  auto row = Eigen::Index{0};
  while (row < total) {
    auto n = static_cast<Eigen::Index>(get<std::uint32_t>(in));
    if (n == 0 || row + n > total) throw Error{"draw store: chunk sizes disagree with the manifest"};
    for (auto c = 0; c != p; ++c) {
      for (auto d = 0; d != n; ++d) pool.draws(row + d, c) = get<double>(in);
    }
    for (auto c = 0; c != v; ++c) {
      for (auto d = 0; d != n; ++d) pool.pointwise(row + d, c) = get<double>(in);
    }
    for (auto d = 0; d != n; ++d) pool.log_posterior[row + d] = get<double>(in);
    for (auto d = 0; d != n; ++d) pool.provenance[row + d].tree = get<std::int32_t>(in);
    for (auto d = 0; d != n; ++d) pool.provenance[row + d].chain = get<std::int32_t>(in);
    for (auto d = 0; d != n; ++d) pool.provenance[row + d].iteration = get<std::int32_t>(in);
    row += n;
  }
  pool.rhat = rhat_all(pool);
  return pool;
}

}  // namespace stemalt
