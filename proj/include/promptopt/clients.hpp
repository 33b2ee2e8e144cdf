#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "promptopt/llmopt.hpp"
#include "promptopt/vocab.hpp"

namespace promptopt {

// Test double: returns queued entries in order; an exhausted queue is a
// transport failure.
class ScriptedClient : public LlmClient {
 public:
  struct Entry {
    bool fail = false;
    std::string text;
  };

  explicit ScriptedClient(std::vector<std::string> replies);
  explicit ScriptedClient(std::vector<Entry> entries) : entries_(entries.begin(), entries.end()) {}

  std::string complete(const InstructionMessages& instruction) override;
  std::string name() const override { return "scripted"; }
  int calls() const { return calls_; }

 private:
  std::deque<Entry> entries_;
  int calls_ = 0;
};

// Upper-bound instructor: always proposes the planted prompt.
class OracleClient : public LlmClient {
 public:
  explicit OracleClient(std::string planted_text);
  std::string complete(const InstructionMessages& instruction) override;
  std::string name() const override { return "oracle"; }

 private:
  std::string planted_text_;
};

// Deterministic offline stand-in for semantic exploration: re-tokenizes the
// best template shown in the instruction and swaps one or two positions for
// near neighbors in embedding space.
class NeighborhoodClient : public LlmClient {
 public:
  NeighborhoodClient(std::shared_ptr<const Vocabulary> vocab, std::uint64_t seed, int n_generate);
  std::string complete(const InstructionMessages& instruction) override;
  std::string name() const override { return "neighborhood"; }

 private:
  std::shared_ptr<const Vocabulary> vocab_;
  std::uint64_t seed_;
  int n_generate_;
  std::uint64_t call_index_ = 0;
};

struct HttpClientConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8080/v1/chat/completions
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.7;
  double timeout_s = 30.0;
  std::string api_key_env = "OPENAI_API_KEY";
};

// Chat-completions transport: POSTs the instruction as a messages array and
// reads the first choice's message content.
class HttpOpenAiClient : public LlmClient {
 public:
  explicit HttpOpenAiClient(HttpClientConfig config);
  std::string complete(const InstructionMessages& instruction) override;
  std::string name() const override { return "http"; }

 private:
  HttpClientConfig config_;
  std::string host_;
  std::string path_;
  int port_ = 80;
  bool tls_ = false;
};

}  // namespace promptopt
