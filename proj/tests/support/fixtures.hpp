#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include "rforge/corpus.hpp"
#include "rforge/error.hpp"
#include "rforge/losskernel.hpp"
#include "rforge/rng.hpp"
#include "rforge/synth.hpp"

namespace fixtures {

using rforge::DatasetSpec;
using rforge::Sample;
using rforge::Split;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("rforge-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// Code of the rforge::Error thrown by `f`, or nullopt when nothing is thrown.
template <typename F>
std::optional<rforge::ErrorCode> error_of(F&& f) {
  try {
    f();
  } catch (const rforge::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline DatasetSpec spec_of(const std::string& kind) {
  return rforge::make_synthetic_dataset(kind, 1, 0).spec;
}

inline DatasetSpec paraphrase_spec() { return spec_of("paraphrase_zh"); }
inline DatasetSpec sentiment_spec() { return spec_of("sentiment_en"); }
inline DatasetSpec topic_spec() { return spec_of("topic_zh"); }
inline DatasetSpec ner_spec() { return spec_of("ner_zh"); }

// Ingested samples of a synthetic dataset, all assigned to `split`.
inline std::vector<Sample> samples_of(const std::string& kind, std::size_t n, std::uint64_t seed,
                                      Split split = Split::kTrain) {
  const auto ds = rforge::make_synthetic_dataset(kind, n, seed);
  auto samples = rforge::ingest_dataset(ds.records, ds.spec);
  for (auto& s : samples) s.split = split;
  return samples;
}

inline Sample make_sample(const std::string& dataset, std::map<std::string, std::string> fields,
                          rforge::Label label, Split split = Split::kTrain) {
  Sample s;
  s.dataset = dataset;
  s.fields = std::move(fields);
  s.id = rforge::sample_id_for(s.fields);
  s.label = std::move(label);
  s.split = split;
  return s;
}

// Hand-rolled generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::size_t size(std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng_.below(hi - lo + 1));
  }
  double real(double lo, double hi) { return lo + (hi - lo) * rng_.uniform(); }
  bool coin() { return rng_.below(2) == 1; }
  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items[static_cast<std::size_t>(rng_.below(items.size()))];
  }
  rforge::Rng& rng() { return rng_; }

  // Random batch: `lo`..`hi` items, 1..max_tokens tokens each, losses in
  // [0, 10); streams drawn at random with at least one of each when possible.
  rforge::TokenLossBatch loss_batch(std::size_t lo = 1, std::size_t hi = 64,
                                    std::size_t max_tokens = 128) {
    rforge::TokenLossBatch batch;
    const auto n = size(lo, hi);
    for (std::size_t i = 0; i < n; ++i) {
      rforge::TokenLossItem item;
      item.sample_id = "s" + std::to_string(i);
      if (n >= 2 && i < 2) {
        item.stream = i == 0 ? rforge::LossStream::kLabel : rforge::LossStream::kRationale;
      } else {
        item.stream = coin() ? rforge::LossStream::kLabel : rforge::LossStream::kRationale;
      }
      const auto tokens = size(1, max_tokens);
      for (std::size_t t = 0; t < tokens; ++t) item.token_losses.push_back(real(0.0, 10.0));
      batch.items.push_back(std::move(item));
    }
    return batch;
  }

 private:
  rforge::Rng rng_;
};

}  // namespace fixtures
