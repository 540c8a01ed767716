#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace rforge {

using json = nlohmann::json;

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  double temperature = 0.0;
  std::optional<double> top_p;
  std::vector<ChatMessage> messages;
  // Structured context for logging and mock providers. Never sent over the
  // wire and not part of the cache key.
  json metadata = json::object();

  // Wire body: {model, temperature, [top_p], messages}.
  json body() const;
  // SHA-256 over model and body; identical prompts to the same model share it.
  std::string cache_key() const;
};

struct ChatResponse {
  std::string text;
  bool refused = false;  // provider-side safety refusal
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string name() const = 0;
};

struct HttpEndpoint {
  std::string url;          // e.g. https://api.example.com/v1/chat/completions
  std::string api_key_env;  // environment variable holding the bearer token
  int timeout_seconds = 60;
};

// POSTs ChatRequest::body() and reads either {"text": ...} or the
// OpenAI-style {"choices":[{"message":{"content": ...}}]} shape.
class HttpChatClient final : public ChatClient {
 public:
  HttpChatClient(std::string name, HttpEndpoint endpoint);
  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return name_; }

 private:
  std::string name_;
  HttpEndpoint endpoint_;
};

// Parses a provider response body; exposed for tests.
ChatResponse parse_chat_response(const json& body);

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds base_delay{200};  // doubles after each failure
};

// Retries any exception from the wrapped client; after the last attempt
// throws kProviderFailure naming the client.
class RetryingChatClient final : public ChatClient {
 public:
  RetryingChatClient(std::shared_ptr<ChatClient> inner, RetryPolicy policy);
  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<ChatClient> inner_;
  RetryPolicy policy_;
};

// Persistent response cache keyed by ChatRequest::cache_key(). Hits never
// reach the wrapped client. Backed by an append-only JSONL file.
class CachingChatClient final : public ChatClient {
 public:
  CachingChatClient(std::shared_ptr<ChatClient> inner, std::filesystem::path cache_file);
  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return inner_->name(); }
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  std::shared_ptr<ChatClient> inner_;
  std::filesystem::path path_;
  std::mutex mu_;
  std::unordered_map<std::string, ChatResponse> entries_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

// Caps in-flight requests to one provider.
class ConcurrencyLimitedChatClient final : public ChatClient {
 public:
  ConcurrencyLimitedChatClient(std::shared_ptr<ChatClient> inner, std::size_t limit);
  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<ChatClient> inner_;
  std::size_t limit_;
  std::size_t in_flight_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

// Counts calls that reach the wrapped client.
class CountingChatClient final : public ChatClient {
 public:
  explicit CountingChatClient(std::shared_ptr<ChatClient> inner) : inner_(std::move(inner)) {}
  ChatResponse complete(const ChatRequest& request) override {
    ++calls_;
    return inner_->complete(request);
  }
  std::string name() const override { return inner_->name(); }
  std::size_t calls() const { return calls_; }

 private:
  std::shared_ptr<ChatClient> inner_;
  std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Embeddings

class EmbeddingClient {
 public:
  virtual ~EmbeddingClient() = default;
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
  virtual std::string model() const = 0;
};

// POST {model, input: [texts]} -> {embeddings: [[real]]} (or OpenAI
// {data: [{embedding}]}).
class HttpEmbeddingClient final : public EmbeddingClient {
 public:
  HttpEmbeddingClient(std::string model, HttpEndpoint endpoint);
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;
  std::string model() const override { return model_; }

 private:
  std::string model_;
  HttpEndpoint endpoint_;
};

// Deterministic offline embedding: signed feature hashing of character
// unigrams and bigrams into `dim` buckets.
class HashingEmbeddingClient final : public EmbeddingClient {
 public:
  explicit HashingEmbeddingClient(std::size_t dim = 64) : dim_(dim) {}
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;
  std::string model() const override { return "hashing-" + std::to_string(dim_); }
  std::size_t calls() const { return calls_; }

 private:
  std::size_t dim_;
  std::atomic<std::size_t> calls_{0};
};

// Shared HTTP helper: POST JSON with optional bearer token from env.
json post_json(const HttpEndpoint& endpoint, const json& body);
// Outbound requests attempted by post_json in this process.
std::size_t http_request_count();

}  // namespace rforge
