#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "promptopt/clients.hpp"
#include "promptopt/orchestrator.hpp"
#include "promptopt/rng.hpp"

using namespace promptopt;

namespace {

RunConfig small_config(std::uint64_t seed) {
  RunConfig config = testing::fixture_run_config(seed);
  config.rounds = 2;
  config.inner_iterations = 3;
  config.final_iterations = 4;
  return config;
}

std::string serialize_events(const std::vector<TrajectoryEvent>& events) {
  std::string out;
  for (const auto& e : events) out += to_json_line(e) + "\n";
  return out;
}

int count_events(const std::vector<TrajectoryEvent>& events, const std::string& kind,
                 const std::string& origin = "") {
  int n = 0;
  for (const auto& e : events)
    if (e.kind == kind && (origin.empty() || e.origin == origin)) ++n;
  return n;
}

}  // namespace

TEST_CASE("N=0 reduces to a pure gradient run of M iterations") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  RunConfig config = small_config(3);
  config.rounds = 0;
  config.final_iterations = 6;
  ScriptedClient client({"unused"});
  const RunResult result = run(config, *task.objective, *task.vocab, client);
  CHECK(result.gradient_steps == 6);
  CHECK(result.llm_calls == 0);
  CHECK(count_events(result.events, "eval", "gradient") == 6);
  CHECK(count_events(result.events, "restart") == 0);
}

TEST_CASE("combined run spends exactly N*m + M gradient steps and clears the pool") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  const RunConfig config = small_config(4);
  OracleClient client(task.planted_prompt.text);
  const RunResult result = run(config, *task.objective, *task.vocab, client);

  const int expected = config.rounds * config.inner_iterations + config.final_iterations;
  CHECK(result.gradient_steps == expected);
  CHECK(count_events(result.events, "eval", "gradient") == expected);
  CHECK(result.llm_calls == config.rounds);

  int round_ends = 0;
  for (const auto& e : result.events) {
    if (e.kind != "round_end") continue;
    ++round_ends;
    // the pool held at least one candidate (dedupe may collapse snapshots)
    // and at most the snapshots plus the generated templates
    CHECK(e.pool_before >= 1);
    CHECK(e.pool_before <= config.inner_iterations + config.instruction.n_generate);
  }
  CHECK(round_ends == config.rounds);

  // per-round gradient evals are exactly m; the final phase holds M
  for (int round = 1; round <= config.rounds; ++round) {
    int in_round = 0;
    for (const auto& e : result.events)
      if (e.kind == "eval" && e.origin == "gradient" && e.round == round) ++in_round;
    CHECK(in_round == config.inner_iterations);
  }
}

TEST_CASE("runs are deterministic given config, seed and a deterministic client") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  const RunConfig config = small_config(9);
  const std::vector<std::string> script = {"bada bade badi bado\nbaco bale baza",
                                           "1. cage dize fuzo", "bada bade badi bado"};
  ScriptedClient c1(script), c2(script);
  const RunResult a = run(config, *task.objective, *task.vocab, c1);
  const RunResult b = run(config, *task.objective, *task.vocab, c2);
  CHECK(serialize_events(a.events) == serialize_events(b.events));
  CHECK(a.best_loss == b.best_loss);
  CHECK(a.best_text == b.best_text);
}

TEST_CASE("oracle client reaches the planted optimum") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  const RunConfig config = testing::fixture_run_config(1);
  OracleClient client(task.planted_prompt.text);
  const RunResult result = run(config, *task.objective, *task.vocab, client);
  const double planted_loss = task.objective->loss(embed(task.planted_prompt, *task.vocab));
  CHECK(std::abs(result.best_loss - planted_loss) <= 1e-6);
  CHECK(result.best_text == task.planted_prompt.text);
}

TEST_CASE("oracle restarts give non-increasing round starting losses") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  RunConfig config = testing::fixture_run_config(2);
  config.final_iterations = 10;
  OracleClient client(task.planted_prompt.text);
  const RunResult result = run(config, *task.objective, *task.vocab, client);

  std::vector<double> start_loss(static_cast<size_t>(config.rounds) + 2, -1.0);
  for (const auto& e : result.events)
    if (e.kind == "eval" && e.origin == "gradient" && e.iteration == 1)
      start_loss[static_cast<size_t>(e.round)] = e.loss;
  for (int round = 2; round <= config.rounds + 1; ++round) {
    REQUIRE(start_loss[static_cast<size_t>(round)] >= 0.0);
    CHECK(start_loss[static_cast<size_t>(round)] <=
          start_loss[static_cast<size_t>(round - 1)] + 1e-12);
  }
}

TEST_CASE("every restart embeds an LLM template or the documented fallback") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  const RunConfig config = small_config(12);
  NeighborhoodClient client(task.vocab, 5, 3);
  const RunResult result = run(config, *task.objective, *task.vocab, client);

  int restarts = 0;
  for (const auto& e : result.events) {
    if (e.kind != "restart") continue;
    ++restarts;
    // the restart prompt must tokenize cleanly back to itself
    const DiscretePrompt p = tokenize(e.prompt, *task.vocab);
    CHECK(render(p, *task.vocab) == e.prompt);
  }
  CHECK(restarts == config.rounds);
}

TEST_CASE("best loss is the running minimum over evaluated candidates") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  const RunConfig config = small_config(6);
  NeighborhoodClient client(task.vocab, 11, 3);
  const RunResult result = run(config, *task.objective, *task.vocab, client);

  double running = std::numeric_limits<double>::infinity();
  for (const auto& e : result.events)
    if (e.kind == "eval") running = std::min(running, e.loss);
  CHECK(result.best_loss == running);
  CHECK(result.evaluations == count_events(result.events, "eval"));
}

TEST_CASE("LLM transport exhaustion degrades the round to gradient-only") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  RunConfig config = small_config(7);
  config.retry.max_attempts = 2;
  config.retry.backoff_base_s = 0.0;
  // every attempt fails in round 1; round 2 succeeds
  ScriptedClient client(std::vector<ScriptedClient::Entry>{
      {true, ""}, {true, ""}, {false, "bada bade badi bado"}});
  const RunResult result = run(config, *task.objective, *task.vocab, client);

  CHECK(result.llm_failures == 1);
  CHECK(count_events(result.events, "llm_error") == 1);
  CHECK(count_events(result.events, "restart") == 1);  // only the successful round restarts
  const int expected = config.rounds * config.inner_iterations + config.final_iterations;
  CHECK(result.gradient_steps == expected);
}

TEST_CASE("unusable LLM output falls back to the pool minimum restart") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  RunConfig config = small_config(8);
  config.rounds = 1;
  // parses to one template whose words are all out-of-vocabulary
  ScriptedClient client({"zzqq99 xxyy11"});
  const RunResult result = run(config, *task.objective, *task.vocab, client);

  CHECK(count_events(result.events, "skip") == 1);
  bool saw_fallback_restart = false;
  for (const auto& e : result.events)
    if (e.kind == "restart" && e.origin == "gradient") saw_fallback_restart = true;
  CHECK(saw_fallback_restart);
}

TEST_CASE("manual prompt is evaluated every round when MP is on") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  RunConfig config = small_config(10);
  config.instruction.include_manual_prompt = true;
  config.instruction.manual_prompt = task.planted_prompt.text;
  OracleClient client(task.planted_prompt.text);
  const RunResult result = run(config, *task.objective, *task.vocab, client);
  CHECK(count_events(result.events, "eval", "manual") == config.rounds);
}

TEST_CASE("manual init embeds the given text") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  RunConfig config = small_config(1);
  config.rounds = 0;
  config.final_iterations = 1;
  config.manual_init = true;
  config.init_text = task.planted_prompt.text;
  ScriptedClient client({"x"});
  const RunResult result = run(config, *task.objective, *task.vocab, client);
  // one step from the planted embedding stays in its basin
  const double planted_loss = task.objective->loss(embed(task.planted_prompt, *task.vocab));
  CHECK(result.best_loss < planted_loss + 0.05);
}

TEST_CASE("gradient-only arm spends the matched budget") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  const RunConfig config = small_config(5);
  const RunResult result = run_gradient_only(config, *task.objective, *task.vocab);
  CHECK(result.gradient_steps ==
        config.rounds * config.inner_iterations + config.final_iterations);
  CHECK(result.llm_calls == 0);
  CHECK(count_events(result.events, "restart") == 0);
}

TEST_CASE("gradient-only converges on the quadratic to the target prompt") {
  const Vocabulary vocab = Vocabulary::random(23, 40, 6);
  const DiscretePrompt target = make_prompt({4, 8, 15}, vocab);
  const auto objective = make_quadratic(target, vocab);
  RunConfig config;
  config.rounds = 0;
  config.final_iterations = 100;
  config.gd.lr = 0.25;
  config.prompt_length = 3;
  config.seed = 77;
  const RunResult result = run_gradient_only(config, *objective, vocab);
  CHECK(result.best_loss == 0.0);  // projection hits the target exactly
  CHECK(result.best_text == target.text);
  CHECK(result.best_accuracy == 100.0);
}

TEST_CASE("noise restart with sigma zero equals the uninterrupted gradient run") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  RunConfig config = small_config(13);
  config.noise_sigma = 0.0;
  const RunResult noise = run_noise_restart(config, *task.objective, *task.vocab);
  const RunResult plain = run_gradient_only(config, *task.objective, *task.vocab);

  std::vector<double> noise_losses, plain_losses;
  for (const auto& e : noise.events)
    if (e.kind == "eval") noise_losses.push_back(e.loss);
  for (const auto& e : plain.events)
    if (e.kind == "eval") plain_losses.push_back(e.loss);
  CHECK(noise_losses == plain_losses);
}

TEST_CASE("noise restarts are reproducible and perturb the trajectory") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  RunConfig config = small_config(14);
  config.noise_sigma = 0.5;
  const RunResult a = run_noise_restart(config, *task.objective, *task.vocab);
  const RunResult b = run_noise_restart(config, *task.objective, *task.vocab);
  CHECK(serialize_events(a.events) == serialize_events(b.events));
  CHECK(count_events(a.events, "restart", "noise") == config.rounds);

  const RunResult plain = run_gradient_only(config, *task.objective, *task.vocab);
  CHECK(serialize_events(a.events) != serialize_events(plain.events));
}

// ---- trajectory log ----

TEST_CASE("trajectory log flush is ordered and idempotent") {
  TrajectoryLog log;
  for (int i = 1; i <= 3; ++i) {
    TrajectoryEvent e;
    e.kind = "eval";
    e.round = 1;
    e.iteration = i;
    e.has_score = true;
    e.loss = 0.5 * i;
    e.accuracy = 10.0 * i;
    log.append(e);
  }
  std::ostringstream sink;
  log.flush(sink);
  const std::string first = sink.str();
  CHECK(std::count(first.begin(), first.end(), '\n') == 3);

  log.flush(sink);  // nothing new: no duplicate lines
  CHECK(sink.str() == first);

  TrajectoryEvent extra;
  extra.kind = "round_end";
  extra.round = 1;
  log.append(extra);
  log.flush(sink);
  const std::string all = sink.str();
  CHECK(std::count(all.begin(), all.end(), '\n') == 4);
  CHECK(all.substr(0, first.size()) == first);
}

TEST_CASE("event serialization round trips losses exactly") {
  Rng rng(90);
  for (int i = 0; i < 50; ++i) {
    TrajectoryEvent e;
    e.kind = "eval";
    e.round = 1;
    e.iteration = i;
    e.origin = "gradient";
    e.prompt = "a \"quoted\" prompt with\ttab";
    e.has_score = true;
    e.loss = std::exp(8.0 * rng.gaussian());
    e.accuracy = 100.0 * rng.uniform();
    e.wall_time = rng.uniform();
    const TrajectoryEvent back = parse_json_line(to_json_line(e), 1);
    CHECK(back.loss == e.loss);
    CHECK(back.accuracy == e.accuracy);
    CHECK(back.wall_time == e.wall_time);
    CHECK(back.prompt == e.prompt);
    CHECK(back.kind == e.kind);
  }
}

TEST_CASE("malformed trajectory lines carry their line number") {
  try {
    parse_json_line("{not json", 17);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::parse);
    CHECK(std::string(e.what()).find("17") != std::string::npos);
  }
}

// ---- ablation ----

TEST_CASE("ablation grids expand to the published axes") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  RunConfig base = small_config(1);
  base.instruction.manual_prompt = task.planted_prompt.text;
  const ClientFactory factory = [&] {
    return std::make_unique<NeighborhoodClient>(task.vocab, 21, 3);
  };

  SUBCASE("instruction flags: 4 rows, all-off runs the noise arm") {
    AblationGrid grid;
    grid.axes = {{"flags", {"000", "110", "101", "111"}}};
    const auto cells = run_ablation(grid, base, *task.objective, *task.vocab, factory);
    REQUIRE(cells.size() == 4);
    for (const auto& cell : cells) {
      INFO("cell ", cell.index, " error: ", cell.error);
      CHECK(!cell.failed);
    }
    CHECK(cells[0].assignment.at("flags") == "000");
  }

  SUBCASE("rounds axis mirrors 1..4") {
    AblationGrid grid;
    grid.axes = {{"rounds", {"1", "2", "3", "4"}}};
    grid.seeds = {1, 2};
    const auto cells = run_ablation(grid, base, *task.objective, *task.vocab, factory);
    REQUIRE(cells.size() == 4);
    for (const auto& cell : cells) {
      CHECK(!cell.failed);
      CHECK(cell.seeds_run == 2);
    }
  }

  SUBCASE("two axes expand to the cartesian product") {
    AblationGrid grid;
    grid.axes = {{"metric", {"l2", "cosine"}}, {"prompt-len", {"4", "8"}}};
    const auto cells = run_ablation(grid, base, *task.objective, *task.vocab, factory);
    REQUIRE(cells.size() == 4);
    CHECK(cells[0].assignment.at("metric") == "l2");
    CHECK(cells[0].assignment.at("prompt-len") == "4");
    CHECK(cells[1].assignment.at("prompt-len") == "8");
    CHECK(cells[3].assignment.at("metric") == "cosine");
  }
}

TEST_CASE("ablation rejects malformed grids") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  const RunConfig base = small_config(1);
  const ClientFactory factory = [&] {
    return std::make_unique<NeighborhoodClient>(task.vocab, 21, 3);
  };

  AblationGrid empty;
  CHECK_THROWS_AS(run_ablation(empty, base, *task.objective, *task.vocab, factory), Error);

  AblationGrid bad_axis;
  bad_axis.axes = {{"learning-rate", {"0.1"}}};
  CHECK_THROWS_AS(run_ablation(bad_axis, base, *task.objective, *task.vocab, factory), Error);

  AblationGrid bad_flags;
  bad_flags.axes = {{"flags", {"2x1"}}};
  CHECK_THROWS_AS(run_ablation(bad_flags, base, *task.objective, *task.vocab, factory), Error);

  AblationGrid dup;
  dup.axes = {{"rounds", {"1"}}, {"rounds", {"2"}}};
  CHECK_THROWS_AS(run_ablation(dup, base, *task.objective, *task.vocab, factory), Error);
}

TEST_CASE("a failing cell is reported in place while others complete") {
  const SyntheticTask task = make_synthetic_task(testing::fixture_task_spec());
  RunConfig base = small_config(1);
  // MP flag on without a manual prompt makes those cells fail validation
  base.instruction.manual_prompt = std::nullopt;
  const ClientFactory factory = [&] {
    return std::make_unique<NeighborhoodClient>(task.vocab, 21, 3);
  };
  AblationGrid grid;
  grid.axes = {{"flags", {"101", "111"}}};
  const auto cells = run_ablation(grid, base, *task.objective, *task.vocab, factory);
  REQUIRE(cells.size() == 2);
  CHECK(!cells[0].failed);
  CHECK(cells[1].failed);
  CHECK(!cells[1].error.empty());

  const std::string table = ablation_table(cells);
  CHECK(table.find("failed: ") != std::string::npos);
  CHECK(table.find("\tok\n") != std::string::npos);
  CHECK(table.rfind("cell\tflags\tseeds\tmean_loss", 0) == 0);
}
