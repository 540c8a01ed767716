#include "rforge/providers.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "rforge/error.hpp"
#include "rforge/hash.hpp"
#include "rforge/jsonl.hpp"
#include "rforge/text.hpp"

namespace rforge {

json ChatRequest::body() const {
  json messages_json = json::array();
  for (const auto& m : messages) {
    messages_json.push_back({{"role", m.role}, {"content", m.content}});
  }
  json j = {{"model", model}, {"temperature", temperature}, {"messages", messages_json}};
  if (top_p) j["top_p"] = *top_p;
  return j;
}

std::string ChatRequest::cache_key() const {
  return sha256_hex(model + '\x1f' + body().dump());
}

ChatResponse parse_chat_response(const json& body) {
  ChatResponse r;
  if (body.contains("text") && body["text"].is_string()) {
    r.text = body["text"].get<std::string>();
    r.refused = body.value("refused", false);
    return r;
  }
  if (body.contains("choices") && body["choices"].is_array() && !body["choices"].empty()) {
    const auto& choice = body["choices"][0];
    const auto& message = choice.value("message", json::object());
    if (message.contains("content") && message["content"].is_string()) {
      r.text = message["content"].get<std::string>();
    }
    if (message.contains("refusal") && !message["refusal"].is_null()) r.refused = true;
    if (choice.value("finish_reason", std::string()) == "content_filter") r.refused = true;
    return r;
  }
  throw Error(ErrorCode::kProviderFailure, "unrecognised chat response: " + body.dump());
}

namespace {

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidConfig, "endpoint url lacks a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

namespace {
std::atomic<std::size_t> g_http_requests{0};
}  // namespace

std::size_t http_request_count() { return g_http_requests.load(); }

json post_json(const HttpEndpoint& endpoint, const json& body) {
  ++g_http_requests;
  const auto url = parse_url(endpoint.url);
  httplib::Client client(url.base);
  client.set_connection_timeout(endpoint.timeout_seconds);
  client.set_read_timeout(endpoint.timeout_seconds);
  client.set_write_timeout(endpoint.timeout_seconds);
  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    const char* key = std::getenv(endpoint.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw Error(ErrorCode::kInvalidConfig,
                  "environment variable " + endpoint.api_key_env + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  auto res = client.Post(url.path, headers, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::kProviderFailure,
                endpoint.url + ": " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::kProviderFailure,
                endpoint.url + ": HTTP " + std::to_string(res->status));
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kProviderFailure, endpoint.url + ": invalid JSON: " + e.what());
  }
}

HttpChatClient::HttpChatClient(std::string name, HttpEndpoint endpoint)
    : name_(std::move(name)), endpoint_(std::move(endpoint)) {}

ChatResponse HttpChatClient::complete(const ChatRequest& request) {
  return parse_chat_response(post_json(endpoint_, request.body()));
}

RetryingChatClient::RetryingChatClient(std::shared_ptr<ChatClient> inner, RetryPolicy policy)
    : inner_(std::move(inner)), policy_(policy) {}

ChatResponse RetryingChatClient::complete(const ChatRequest& request) {
  std::string last_error;
  auto delay = policy_.base_delay;
  for (int attempt = 1; attempt <= policy_.attempts; ++attempt) {
    try {
      return inner_->complete(request);
    } catch (const std::exception& e) {
      last_error = e.what();
    }
    if (attempt < policy_.attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw Error(ErrorCode::kProviderFailure, inner_->name() + " failed after " +
                                               std::to_string(policy_.attempts) +
                                               " attempts: " + last_error);
}

CachingChatClient::CachingChatClient(std::shared_ptr<ChatClient> inner,
                                     std::filesystem::path cache_file)
    : inner_(std::move(inner)), path_(std::move(cache_file)) {
  if (std::filesystem::exists(path_)) {
    for (const auto& row : read_jsonl(path_)) {
      entries_[row.at("key").get<std::string>()] =
          ChatResponse{row.at("text").get<std::string>(), row.value("refused", false)};
    }
  }
}

ChatResponse CachingChatClient::complete(const ChatRequest& request) {
  const auto key = request.cache_key();
  {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      ++hits_;
      return it->second;
    }
  }
  ++misses_;
  auto response = inner_->complete(request);
  std::lock_guard lock(mu_);
  if (entries_.emplace(key, response).second) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    append_jsonl(path_, {{"key", key},
                         {"model", request.model},
                         {"text", response.text},
                         {"refused", response.refused}});
  }
  return response;
}

ConcurrencyLimitedChatClient::ConcurrencyLimitedChatClient(std::shared_ptr<ChatClient> inner,
                                                           std::size_t limit)
    : inner_(std::move(inner)), limit_(limit == 0 ? 1 : limit) {}

ChatResponse ConcurrencyLimitedChatClient::complete(const ChatRequest& request) {
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
  }
  struct Release {
    ConcurrencyLimitedChatClient* self;
    ~Release() {
      {
        std::lock_guard lock(self->mu_);
        --self->in_flight_;
      }
      self->cv_.notify_one();
    }
  } release{this};
  return inner_->complete(request);
}

HttpEmbeddingClient::HttpEmbeddingClient(std::string model, HttpEndpoint endpoint)
    : model_(std::move(model)), endpoint_(std::move(endpoint)) {}

std::vector<std::vector<double>> HttpEmbeddingClient::embed(
    const std::vector<std::string>& texts) {
  const json body = post_json(endpoint_, {{"model", model_}, {"input", texts}});
  std::vector<std::vector<double>> out;
  if (body.contains("embeddings")) {
    out = body["embeddings"].get<std::vector<std::vector<double>>>();
  } else if (body.contains("data")) {
    for (const auto& item : body["data"]) {
      out.push_back(item.at("embedding").get<std::vector<double>>());
    }
  } else {
    throw Error(ErrorCode::kProviderFailure, "embedding response lacks 'embeddings'");
  }
  if (out.size() != texts.size()) {
    throw Error(ErrorCode::kProviderFailure,
                "embedding count " + std::to_string(out.size()) + " != input count " +
                    std::to_string(texts.size()));
  }
  return out;
}

std::vector<std::vector<double>> HashingEmbeddingClient::embed(
    const std::vector<std::string>& texts) {
  ++calls_;
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    std::vector<double> v(dim_, 0.0);
    const auto cps = text::decode_utf8(t);
    auto add = [&](std::u32string_view gram, double weight) {
      const auto h = fnv1a64(text::encode_utf8(gram), gram.size());
      const double sign = (h >> 63) ? -1.0 : 1.0;
      v[h % dim_] += sign * weight;
    };
    for (std::size_t i = 0; i < cps.size(); ++i) {
      if (text::is_white_space(cps[i])) continue;
      add(std::u32string_view(cps).substr(i, 1), 1.0);
      if (i + 1 < cps.size() && !text::is_white_space(cps[i + 1])) {
        add(std::u32string_view(cps).substr(i, 2), 0.5);
      }
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 == 0.0) {
      v[0] = 1.0;
    } else {
      const double inv = 1.0 / std::sqrt(norm2);
      for (double& x : v) x *= inv;
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace rforge
