#include "rforge/embedding.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>

#include "rforge/concurrency.hpp"
#include "rforge/error.hpp"
#include "rforge/jsonl.hpp"

namespace rforge {

static_assert(std::endian::native == std::endian::little,
              "vector cache layout assumes a little-endian host");

namespace {

constexpr char kMagic[] = "RFVEC1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

template <typename T>
void put_raw(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_raw(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) {
    throw Error(ErrorCode::kIo, "truncated vector cache");
  }
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

VectorCache::VectorCache(std::filesystem::path file, std::string model, std::size_t dim)
    : file_(std::move(file)), model_(std::move(model)), dim_(dim) {}

std::filesystem::path VectorCache::sidecar_path() const {
  auto p = file_;
  p += ".json";
  return p;
}

void VectorCache::load() {
  table_.clear();
  if (!std::filesystem::exists(file_) || !std::filesystem::exists(sidecar_path())) return;
  const json meta = read_json_file(sidecar_path());
  if (meta.value("model", std::string()) != model_ ||
      meta.value("dim", std::size_t{0}) != dim_) {
    return;
  }
  const std::string data = read_text_file(file_);
  if (data.compare(0, kMagicLen, kMagic) != 0) {
    throw Error(ErrorCode::kIo, file_.string() + ": not a vector cache");
  }
  std::size_t pos = kMagicLen;
  const auto dim = get_raw<std::uint32_t>(data, pos);
  const auto count = get_raw<std::uint64_t>(data, pos);
  if (dim != dim_) return;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get_raw<std::uint16_t>(data, pos);
    if (pos + len > data.size()) throw Error(ErrorCode::kIo, "truncated vector cache");
    std::string id = data.substr(pos, len);
    pos += len;
    std::vector<double> values(dim);
    for (auto& v : values) v = get_raw<double>(data, pos);
    table_.emplace(std::move(id), std::move(values));
  }
}

void VectorCache::save() const {
  std::vector<const std::string*> ids;
  ids.reserve(table_.size());
  for (const auto& [id, _] : table_) ids.push_back(&id);
  std::sort(ids.begin(), ids.end(), [](const auto* a, const auto* b) { return *a < *b; });

  std::string out(kMagic, kMagicLen);
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  put_raw<std::uint64_t>(out, table_.size());
  for (const auto* id : ids) {
    put_raw<std::uint16_t>(out, static_cast<std::uint16_t>(id->size()));
    out += *id;
    for (double v : table_.at(*id)) put_raw<double>(out, v);
  }
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
  write_text_file(file_, out);
  write_json_file(sidecar_path(),
                  {{"model", model_}, {"dim", dim_}, {"count", table_.size()}});
}

void VectorCache::put(const std::string& id, std::vector<double> values) {
  if (values.size() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                id + " has dim " + std::to_string(values.size()) + ", cache dim " +
                    std::to_string(dim_));
  }
  table_[id] = std::move(values);
}

EmbedStats embed_samples(std::span<const Sample> samples, const DatasetSpec& spec,
                         EmbeddingClient& client, VectorCache& cache,
                         const EmbedOptions& options) {
  EmbedStats stats;
  std::vector<const Sample*> todo;
  for (const auto& s : samples) {
    if (cache.contains(s.id)) {
      ++stats.cached;
    } else {
      todo.push_back(&s);
    }
  }
  std::sort(todo.begin(), todo.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
  todo.erase(std::unique(todo.begin(), todo.end(),
                         [](const auto* a, const auto* b) { return a->id == b->id; }),
             todo.end());
  if (todo.empty()) return stats;

  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t n_batches = (todo.size() + batch - 1) / batch;
  std::vector<std::vector<std::vector<double>>> results(n_batches);
  parallel_for(n_batches, options.concurrency, [&](std::size_t b) {
    std::vector<std::string> texts;
    for (std::size_t i = b * batch; i < std::min(todo.size(), (b + 1) * batch); ++i) {
      texts.push_back(render_input(*todo[i], spec));
    }
    std::string last_error;
    for (int attempt = 0; attempt < std::max(1, options.attempts); ++attempt) {
      try {
        results[b] = client.embed(texts);
        if (results[b].size() != texts.size()) {
          throw Error(ErrorCode::kProviderFailure, "embedding count mismatch");
        }
        return;
      } catch (const std::exception& e) {
        last_error = e.what();
      }
    }
    throw Error(ErrorCode::kProviderFailure,
                client.model() + " embedding batch failed: " + last_error);
  });

  for (std::size_t b = 0; b < n_batches; ++b) {
    for (std::size_t j = 0; j < results[b].size(); ++j) {
      auto v = std::move(results[b][j]);
      l2_normalize(v);
      cache.put(todo[b * batch + j]->id, std::move(v));
      ++stats.embedded;
    }
  }
  stats.requests = n_batches;
  return stats;
}

}  // namespace rforge
