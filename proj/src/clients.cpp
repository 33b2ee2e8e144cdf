#include "promptopt/clients.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "promptopt/rng.hpp"

namespace promptopt {

ScriptedClient::ScriptedClient(std::vector<std::string> replies) {
  for (auto& r : replies) entries_.push_back(Entry{false, std::move(r)});
}

std::string ScriptedClient::complete(const InstructionMessages&) {
  ++calls_;
  if (entries_.empty())
    throw Error(Errc::llm_transport, "scripted client has no queued reply left");
  Entry e = std::move(entries_.front());
  entries_.pop_front();
  if (e.fail) throw Error(Errc::llm_transport, "scripted client failure");
  return e.text;
}

OracleClient::OracleClient(std::string planted_text) : planted_text_(std::move(planted_text)) {
  if (planted_text_.empty())
    throw Error(Errc::config, "oracle client needs a planted prompt (synthetic tasks only)");
}

std::string OracleClient::complete(const InstructionMessages&) { return planted_text_; }

NeighborhoodClient::NeighborhoodClient(std::shared_ptr<const Vocabulary> vocab,
                                       std::uint64_t seed, int n_generate)
    : vocab_(std::move(vocab)), seed_(seed), n_generate_(n_generate) {
  if (!vocab_) throw Error(Errc::config, "neighborhood client needs a vocabulary");
  if (n_generate_ < 1) throw Error(Errc::config, "n_generate must be at least 1");
}

namespace {

// The best template is the last "Templates:" block in the instruction.
std::string last_template_line(const std::string& text) {
  std::istringstream ss(text);
  std::string line, last;
  while (std::getline(ss, line)) {
    if (line.rfind("Templates: ", 0) == 0) last = line.substr(11);
  }
  return last;
}

// nth nearest token to |id| by L2 embedding distance, skipping the token
// itself and specials.
int nth_neighbor(const Vocabulary& vocab, int id, int nth) {
  const auto& emb = vocab.embeddings();
  std::vector<std::pair<double, int>> dist;
  dist.reserve(static_cast<size_t>(vocab.size()));
  for (int t = 0; t < vocab.size(); ++t) {
    if (t == id || vocab.is_special(t)) continue;
    dist.emplace_back((emb.row(t) - emb.row(id)).squaredNorm(), t);
  }
  if (dist.empty()) return id;
  const size_t rank = std::min(static_cast<size_t>(nth), dist.size() - 1);
  std::nth_element(dist.begin(), dist.begin() + static_cast<long>(rank), dist.end());
  return dist[rank].second;
}

}  // namespace

std::string NeighborhoodClient::complete(const InstructionMessages& instruction) {
  Rng rng(mix_seed(seed_, call_index_++));

  std::vector<int> base_ids;
  const std::string best = last_template_line(instruction.user);
  if (!best.empty()) {
    try {
      base_ids = tokenize(best, *vocab_).token_ids;
    } catch (const Error&) {
      // fall through to a random base below
    }
  }
  if (base_ids.empty()) {
    for (int i = 0; i < 4; ++i) {
      int id;
      do {
        id = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(vocab_->size())));
      } while (vocab_->is_special(id));
      base_ids.push_back(id);
    }
  }

  std::ostringstream out;
  for (int v = 0; v < n_generate_; ++v) {
    std::vector<int> ids = base_ids;
    const int swaps = ids.size() > 1 ? 1 + static_cast<int>(rng.uniform_int(2)) : 1;
    for (int s = 0; s < swaps; ++s) {
      const auto pos = static_cast<size_t>(rng.uniform_int(ids.size()));
      const int rank = static_cast<int>(rng.uniform_int(3));
      ids[pos] = nth_neighbor(*vocab_, ids[pos], rank);
    }
    out << render(make_prompt(ids, *vocab_), *vocab_) << "\n";
  }
  return out.str();
}

HttpOpenAiClient::HttpOpenAiClient(HttpClientConfig config) : config_(std::move(config)) {
  const std::string& url = config_.endpoint;
  std::string rest;
  if (url.rfind("https://", 0) == 0) {
    tls_ = true;
    port_ = 443;
    rest = url.substr(8);
  } else if (url.rfind("http://", 0) == 0) {
    rest = url.substr(7);
  } else {
    throw Error(Errc::config, "endpoint must start with http:// or https://");
  }
  const size_t slash = rest.find('/');
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  path_ = slash == std::string::npos ? "/v1/chat/completions" : rest.substr(slash);
  const size_t colon = hostport.find(':');
  if (colon != std::string::npos) {
    host_ = hostport.substr(0, colon);
    port_ = std::atoi(hostport.c_str() + colon + 1);
  } else {
    host_ = hostport;
  }
  if (host_.empty()) throw Error(Errc::config, "endpoint has no host");
  if (tls_) throw Error(Errc::config, "https endpoints are not supported by this build");
}

std::string HttpOpenAiClient::complete(const InstructionMessages& instruction) {
  nlohmann::json messages = nlohmann::json::array();
  if (instruction.system)
    messages.push_back({{"role", "system"}, {"content", *instruction.system}});
  messages.push_back({{"role", "user"}, {"content", instruction.user}});
  const nlohmann::json body = {
      {"model", config_.model},
      {"temperature", config_.temperature},
      {"messages", messages},
  };

  httplib::Client client(host_, port_);
  const auto timeout = std::chrono::duration<double>(config_.timeout_s);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
      headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
        err == httplib::Error::Write)
      throw Error(Errc::llm_timeout, "request to " + host_ + " timed out");
    throw Error(Errc::llm_transport, "request to " + host_ + " failed: " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300)
    throw Error(Errc::llm_transport,
                "endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body);

  try {
    const auto json = nlohmann::json::parse(res->body);
    return json.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, std::string("malformed chat-completions response: ") + e.what());
  }
}

}  // namespace promptopt
