#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>

#include "rforge/corpus.hpp"
#include "rforge/curate.hpp"
#include "rforge/providers.hpp"

namespace rforge {

// Vector store for one dataset: a binary file keyed by sample id plus a JSON
// sidecar {model, dim, count}. Entries are written in id order, so the file
// is a pure function of its contents.
//
// Binary layout: "RFVEC1\n", u32 dim, u64 count, then per entry u16 id length,
// id bytes, dim little-endian f64 values.
class VectorCache {
 public:
  VectorCache(std::filesystem::path file, std::string model, std::size_t dim);

  // Loads the file when present and its sidecar agrees on model and dim;
  // a disagreeing cache is ignored (it will be overwritten on save).
  void load();
  void save() const;

  const VectorTable& table() const { return table_; }
  bool contains(const std::string& id) const { return table_.count(id) != 0; }
  void put(const std::string& id, std::vector<double> values);

  std::filesystem::path sidecar_path() const;

 private:
  std::filesystem::path file_;
  std::string model_;
  std::size_t dim_;
  VectorTable table_;
};

struct EmbedOptions {
  std::size_t batch_size = 32;
  std::size_t concurrency = 4;
  int attempts = 3;  // per batch request
};

struct EmbedStats {
  std::size_t cached = 0;
  std::size_t embedded = 0;
  std::size_t requests = 0;
};

// Embeds every sample not already in `cache` (text = render_input), stores
// the L2-normalized vectors in the cache and returns the stats. Throws
// kProviderFailure when a batch fails all attempts and kDimensionMismatch
// when the provider returns vectors of the wrong size.
EmbedStats embed_samples(std::span<const Sample> samples, const DatasetSpec& spec,
                         EmbeddingClient& client, VectorCache& cache,
                         const EmbedOptions& options = {});

}  // namespace rforge
