#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "rforge/providers.hpp"

namespace rforge {

// Offline stand-ins for the judge, generator and fine-tuned models. Each one
// answers from ChatRequest::metadata and a hash of the request identity, so
// output is a pure function of the request.

// Returns the reference label except for a hashed `error_rate` share of
// samples, where it names a different label; `abstain_rate` of answers are
// unparseable.
class MockJudgeClient final : public ChatClient {
 public:
  MockJudgeClient(std::string name, double error_rate, double abstain_rate = 0.0);
  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return name_; }

 private:
  std::string name_;
  double error_rate_;
  double abstain_rate_;
};

// Rationales ending in the answer sentence. Sample ids hash into buckets
// that exercise every filter rule: refusal, over-length, inconsistent answer
// and leak phrasing (each about `fault_rate`).
class MockGeneratorClient final : public ChatClient {
 public:
  explicit MockGeneratorClient(std::string name, double fault_rate = 0.02);
  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return name_; }

 private:
  std::string name_;
  double fault_rate_;
};

// A fine-tuned model answering inference prompts in the shape the mode asks
// for, correct with a per-method probability.
class MockInferenceClient final : public ChatClient {
 public:
  explicit MockInferenceClient(std::string name);
  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return name_; }

  static double accuracy(const std::string& method, const std::string& mode);

 private:
  std::string name_;
};

// Every mock a dry run needs, each behind a call counter.
struct MockSuite {
  std::vector<std::shared_ptr<CountingChatClient>> judges;  // three
  std::shared_ptr<CountingChatClient> generator;
  std::shared_ptr<CountingChatClient> inference;
  std::shared_ptr<HashingEmbeddingClient> embedding;

  // judge_names must hold three names; error rates are 5%, 10% and 15%.
  static MockSuite make(const std::vector<std::string>& judge_names,
                        std::size_t embedding_dim = 64);
  std::size_t chat_calls() const;
};

}  // namespace rforge
