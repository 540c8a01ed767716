#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rforge/corpus.hpp"

namespace rforge {

using json = nlohmann::json;

// Synthetic stand-ins for real datasets: a spec plus raw records in the
// ingestion format, generated from a seed.
struct SyntheticDataset {
  DatasetSpec spec;
  std::vector<json> records;
};

// Built-in shapes: "paraphrase_zh" (two questions, 匹配/不匹配, criteria),
// "sentiment_en" (Positive/Negative, criteria), "topic_zh" (four topics, no
// criteria) and "ner_zh" (PER/LOC/ORG spans).
const std::vector<std::string>& synthetic_kinds();

// `n` records; about `duplicate_rate` of them repeat an earlier record's
// fields so deduplication has work to do. Throws kInvalidRecord for an
// unknown kind.
SyntheticDataset make_synthetic_dataset(const std::string& kind, std::size_t n,
                                        std::uint64_t seed, double duplicate_rate = 0.0);

struct SyntheticWorkspace {
  std::filesystem::path config;  // config.json
  std::vector<std::string> datasets;
  std::size_t records = 0;
};

// Writes specs/, raw/, exemplars/ and a config.json wired to mock providers,
// splitting `total` records evenly over the built-in kinds. `train_cap`
// becomes the configured training cap.
SyntheticWorkspace write_synthetic_workspace(const std::filesystem::path& dir, std::size_t total,
                                             std::uint64_t seed, std::size_t train_cap = 25000);

}  // namespace rforge
