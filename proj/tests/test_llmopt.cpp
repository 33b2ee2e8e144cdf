#include <doctest.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

// project headers (and Eigen) must precede httplib.h: glibc's resolv.h,
// pulled in by httplib, defines a `res` macro that mangles Eigen internals
#include "helpers.hpp"
#include "promptopt/clients.hpp"
#include "promptopt/llmopt.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace promptopt;

namespace {

Candidate scored(const std::string& text, double loss, double accuracy, Origin origin,
                 int round = 1, int iteration = 0) {
  Candidate c;
  c.text = text;
  c.loss = loss;
  c.accuracy = accuracy;
  c.origin = origin;
  c.round = round;
  c.iteration = iteration;
  return c;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kFixtureDir = PROMPTOPT_FIXTURE_DIR;

}  // namespace

TEST_CASE("pool deduplicates by text keeping the lower loss") {
  CandidatePool pool;
  pool.add(scored("a photo of", 2.0, 10.0, Origin::gradient, 1, 1));
  pool.add(scored("a photo of", 1.5, 20.0, Origin::gradient, 1, 2));
  REQUIRE(pool.size() == 1);
  CHECK(pool.entries()[0].loss == 1.5);

  pool.add(scored("a photo of", 1.9, 5.0, Origin::llm, 1, 3));
  REQUIRE(pool.size() == 1);
  CHECK(pool.entries()[0].loss == 1.5);

  pool.add(scored("an image of", 3.0, 1.0, Origin::llm, 1, 1));
  CHECK(pool.size() == 2);
}

TEST_CASE("select_topk orders worst-first with the best last") {
  CandidatePool pool;
  pool.add(scored("t1", 1.96, 30.0, Origin::gradient, 1, 2));
  pool.add(scored("t2", 2.18, 20.0, Origin::gradient, 1, 1));
  pool.add(scored("t3", 1.85, 50.0, Origin::gradient, 1, 3));

  const auto top = select_topk(pool, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].loss == 2.18);
  CHECK(top[1].loss == 1.96);
  CHECK(top[2].loss == 1.85);

  const auto top1 = select_topk(pool, 1);
  REQUIRE(top1.size() == 1);
  CHECK(top1[0].loss == 1.85);

  const auto big = select_topk(pool, 50);
  CHECK(big.size() == 3);
}

TEST_CASE("select_topk breaks loss ties by earlier round/iteration") {
  CandidatePool pool;
  pool.add(scored("late", 1.0, 0.0, Origin::gradient, 2, 5));
  pool.add(scored("early", 1.0, 0.0, Origin::gradient, 1, 3));
  pool.add(scored("mid", 1.0, 0.0, Origin::gradient, 1, 7));
  const auto top = select_topk(pool, 2);
  REQUIRE(top.size() == 2);
  // the two selected are the earlier ones; equal losses keep earlier first
  CHECK(top[0].text == "early");
  CHECK(top[1].text == "mid");
}

TEST_CASE("select_topk on an empty pool fails") {
  CandidatePool pool;
  try {
    select_topk(pool, 3);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_pool);
  }
}

TEST_CASE("gpt instruction matches the golden file") {
  std::vector<Candidate> top = {
      scored("a precise satellite view of", 2.18, 20.0, Origin::gradient, 1, 1),
      scored("a crisp high - definition image of", 1.85, 50.0, Origin::gradient, 1, 2),
  };
  InstructionSpec spec;
  spec.manual_prompt = "a centered satellite photo of {}.";
  spec.include_manual_prompt = true;
  const auto manual = scored(*spec.manual_prompt, 1.96, 30.0, Origin::manual, 1, 0);

  const InstructionMessages msg = build_instruction(top, spec, manual);
  CHECK(!msg.system.has_value());
  CHECK(msg.flat() == read_file(kFixtureDir + "/instruction_gpt.golden.txt"));
}

TEST_CASE("llama instruction matches the golden file") {
  std::vector<Candidate> top = {
      scored("a precise satellite view of", 2.18, 20.0, Origin::gradient, 1, 1),
      scored("a crisp high - definition image of", 1.85, 50.0, Origin::gradient, 1, 2),
  };
  InstructionSpec spec;
  spec.style = InstructionStyle::llama;
  spec.max_words = 8;
  spec.task_goal = "image recognition";
  spec.manual_prompt = "a centered satellite photo of {}.";
  spec.include_manual_prompt = true;
  const auto manual = scored(*spec.manual_prompt, 1.96, 30.0, Origin::manual, 1, 0);

  const InstructionMessages msg = build_instruction(top, spec, manual);
  REQUIRE(msg.system.has_value());
  CHECK(msg.system->rfind("You are a helpful, respectful and honest assistant", 0) == 0);
  CHECK(msg.flat() == read_file(kFixtureDir + "/instruction_llama.golden.txt"));
}

TEST_CASE("instruction is a pure function of its inputs") {
  std::vector<Candidate> top = {scored("a view of", 1.5, 40.0, Origin::gradient)};
  InstructionSpec spec;
  CHECK(build_instruction(top, spec).flat() == build_instruction(top, spec).flat());
}

TEST_CASE("flags control the instruction sections") {
  std::vector<Candidate> top = {scored("a view of", 1.5, 40.0, Origin::gradient)};
  InstructionSpec spec;

  SUBCASE("TD only: role and requirements, no trajectory") {
    spec.include_trajectory = false;
    const std::string text = build_instruction(top, spec).flat();
    CHECK(text.find("prompt pattern learner") != std::string::npos);
    CHECK(text.find("Loss:") == std::string::npos);
    CHECK(text.find("Here are some requirements") != std::string::npos);
  }

  SUBCASE("all flags off still emits the requirements block") {
    spec.include_task_description = false;
    spec.include_trajectory = false;
    const std::string text = build_instruction({}, spec).flat();
    CHECK(!text.empty());
    CHECK(text.find("Here are some requirements") != std::string::npos);
    CHECK(text.find("prompt pattern learner") == std::string::npos);
  }

  SUBCASE("OT with no candidates is an error") {
    try {
      build_instruction({}, spec);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::missing_trajectory);
    }
  }

  SUBCASE("requirements reflect the configured counts") {
    spec.n_generate = 5;
    spec.max_words = 7;
    const std::string text = build_instruction(top, spec).flat();
    CHECK(text.find("under 7 words") != std::string::npos);
    CHECK(text.find("Generate 5 templates") != std::string::npos);
  }
}

TEST_CASE("manual block lands at its loss position") {
  std::vector<Candidate> top = {
      scored("worst", 3.0, 1.0, Origin::gradient),
      scored("best", 1.0, 9.0, Origin::gradient),
  };
  InstructionSpec spec;
  spec.manual_prompt = "hand made";
  spec.include_manual_prompt = true;

  SUBCASE("middle") {
    const auto manual = scored("hand made", 2.0, 5.0, Origin::manual);
    const std::string text = build_instruction(top, spec, manual).flat();
    CHECK(text.find("worst") < text.find("hand made"));
    CHECK(text.find("hand made") < text.find("best"));
  }
  SUBCASE("best overall goes last") {
    const auto manual = scored("hand made", 0.5, 80.0, Origin::manual);
    const std::string text = build_instruction(top, spec, manual).flat();
    CHECK(text.find("best") < text.find("hand made"));
  }
  SUBCASE("manual without trajectory") {
    spec.include_trajectory = false;
    const auto manual = scored("hand made", 2.0, 5.0, Origin::manual);
    const std::string text = build_instruction(top, spec, manual).flat();
    CHECK(text.find("hand made") != std::string::npos);
    CHECK(text.find("worst") == std::string::npos);
  }
}

TEST_CASE("parse_response fixture corpus") {
  std::ifstream in(kFixtureDir + "/parse_corpus.json");
  REQUIRE(in);
  nlohmann::json corpus;
  in >> corpus;
  REQUIRE(corpus.size() >= 12);

  for (const auto& entry : corpus) {
    INFO("case: ", entry.at("name").get<std::string>());
    const std::string input = entry.at("input").get<std::string>();
    const int n_expected = entry.value("n_expected", 3);
    const int max_words = entry.value("max_words", 10);
    if (entry.at("expect").is_string()) {
      try {
        parse_response(input, n_expected, max_words);
        FAIL("expected no_templates_parsed");
      } catch (const Error& e) {
        CHECK(e.code() == Errc::no_templates_parsed);
      }
    } else {
      const auto expected = entry.at("expect").get<std::vector<std::string>>();
      CHECK(parse_response(input, n_expected, max_words) == expected);
    }
  }
}

TEST_CASE("parse_response is the inverse of one-template-per-line rendering") {
  const std::vector<std::string> templates = {"a photo of", "an aerial view of",
                                              "the crisp image of"};
  std::string joined;
  for (const auto& t : templates) joined += t + "\n";
  CHECK(parse_response(joined, 3, 10) == templates);
}

TEST_CASE("word counting ignores bare punctuation and the placeholder") {
  CHECK(count_words("a photo of") == 3);
  CHECK(count_words("a photo of {}") == 3);
  CHECK(count_words("a high - definition image") == 4);
  CHECK(count_words("{} - !!") == 0);
}

TEST_CASE("scripted client replies in order and reports exhaustion") {
  ScriptedClient client(std::vector<std::string>{"first", "second"});
  InstructionMessages msg{std::nullopt, "hi"};
  CHECK(client.complete(msg) == "first");
  CHECK(client.complete(msg) == "second");
  CHECK_THROWS_AS(client.complete(msg), Error);
}

TEST_CASE("llm_complete retries transport failures") {
  InstructionMessages msg{std::nullopt, "hi"};
  RetryPolicy policy;
  policy.max_attempts = 3;
  policy.backoff_base_s = 0.0;

  SUBCASE("two failures then success") {
    ScriptedClient client(std::vector<ScriptedClient::Entry>{
        {true, ""}, {true, ""}, {false, "recovered"}});
    const LlmReply reply = llm_complete(client, msg, policy);
    CHECK(reply.text == "recovered");
    CHECK(reply.attempts == 3);
  }

  SUBCASE("persistent failure surfaces the transport error") {
    ScriptedClient client(std::vector<ScriptedClient::Entry>{
        {true, ""}, {true, ""}, {true, ""}, {true, ""}});
    try {
      llm_complete(client, msg, policy);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::llm_transport);
    }
    CHECK(client.calls() == 3);
  }

  SUBCASE("scripted reply comes back verbatim") {
    ScriptedClient client({"1. hello there\n"});
    CHECK(llm_complete(client, msg, policy).text == "1. hello there\n");
  }
}

TEST_CASE("oracle client always proposes the planted text") {
  OracleClient client("bada bade badi bado");
  InstructionMessages msg{std::nullopt, "anything"};
  CHECK(client.complete(msg) == "bada bade badi bado");
  CHECK(client.complete(msg) == "bada bade badi bado");
}

TEST_CASE("neighborhood client is deterministic and proposes in-vocabulary variants") {
  const auto vocab = std::make_shared<Vocabulary>(Vocabulary::random(51, 60, 8));
  const std::string instr =
      "Templates: " + vocab->token(5) + " " + vocab->token(9) + "\nLoss: 1.00\nAccuracy: 0.0\n";
  InstructionMessages msg{std::nullopt, instr};

  NeighborhoodClient a(vocab, 7, 3);
  NeighborhoodClient b(vocab, 7, 3);
  const std::string ra = a.complete(msg);
  CHECK(ra == b.complete(msg));

  const auto templates = parse_response(ra, 3, 10);
  CHECK(templates.size() >= 1);
  for (const auto& t : templates) {
    const DiscretePrompt p = tokenize(t, *vocab);  // throws if not in vocabulary
    CHECK(p.token_ids.size() == 2);
  }

  // a different seed explores differently
  NeighborhoodClient c(vocab, 8, 3);
  CHECK(c.complete(msg) != ra);
}

TEST_CASE("neighborhood client falls back to a random prompt without a trajectory") {
  const auto vocab = std::make_shared<Vocabulary>(Vocabulary::random(52, 60, 8));
  NeighborhoodClient client(vocab, 3, 2);
  InstructionMessages msg{std::nullopt, "no template lines here"};
  const auto templates = parse_response(client.complete(msg), 2, 10);
  CHECK(!templates.empty());
}

TEST_CASE("http client round trips against a local chat-completions server") {
  httplib::Server server;
  std::atomic<int> hits{0};
  nlohmann::json seen_body;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    seen_body = nlohmann::json::parse(req.body);
    const nlohmann::json reply = {
        {"choices", {{{"message", {{"role", "assistant"}, {"content", "1. a canned reply"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread serving([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpClientConfig config;
  config.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  config.model = "test-model";
  config.api_key_env = "";  // no auth in this test
  HttpOpenAiClient client(config);

  InstructionMessages msg{"system text", "user text"};
  CHECK(client.complete(msg) == "1. a canned reply");
  CHECK(hits == 1);
  CHECK(seen_body.at("model") == "test-model");
  REQUIRE(seen_body.at("messages").size() == 2);
  CHECK(seen_body.at("messages")[0].at("role") == "system");
  CHECK(seen_body.at("messages")[0].at("content") == "system text");
  CHECK(seen_body.at("messages")[1].at("role") == "user");

  // gpt-style instructions carry a single user message
  InstructionMessages user_only{std::nullopt, "just user"};
  CHECK(client.complete(user_only) == "1. a canned reply");
  REQUIRE(seen_body.at("messages").size() == 1);
  CHECK(seen_body.at("messages")[0].at("role") == "user");

  server.stop();
  serving.join();
}

TEST_CASE("http client surfaces transport errors and bad payloads") {
  HttpClientConfig config;
  config.endpoint = "http://127.0.0.1:1/v1/chat/completions";  // nothing listens here
  config.timeout_s = 1.0;
  HttpOpenAiClient unreachable(config);
  InstructionMessages msg{std::nullopt, "hi"};
  CHECK_THROWS_AS(unreachable.complete(msg), Error);

  httplib::Server server;
  server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread serving([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  config.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  HttpOpenAiClient garbled(config);
  try {
    garbled.complete(msg);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::parse);
  }
  server.stop();
  serving.join();
}

TEST_CASE("http client validates its endpoint") {
  HttpClientConfig config;
  config.endpoint = "ftp://example.org";
  CHECK_THROWS_AS(HttpOpenAiClient{config}, Error);
  config.endpoint = "";
  CHECK_THROWS_AS(HttpOpenAiClient{config}, Error);
}
