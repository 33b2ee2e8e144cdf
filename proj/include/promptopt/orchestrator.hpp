#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "promptopt/gdopt.hpp"
#include "promptopt/llmopt.hpp"
#include "promptopt/objective.hpp"
#include "promptopt/trajectory.hpp"
#include "promptopt/vocab.hpp"

namespace promptopt {

enum class ClockKind { logical, real };

struct RunConfig {
  int rounds = 3;             // N
  int inner_iterations = 10;  // m
  int final_iterations = 200; // M
  int topk = 10;              // k
  GdConfig gd;                // lr/momentum; iteration counts come from the fields above
  int prompt_length = 4;      // L for random initialization
  bool manual_init = false;
  std::string init_text;      // used when manual_init is set
  std::uint64_t seed = 1;
  Metric metric = Metric::l2;
  InstructionSpec instruction;
  RetryPolicy retry;
  double noise_sigma = 0.1;   // noise-restart baseline only
  ClockKind clock = ClockKind::logical;

  void validate() const;
};

struct RoundSummary {
  int round = 0;              // 1..N, then N+1 for the final convergence phase
  double best_loss = 0.0;
  double best_accuracy = 0.0;
  std::string best_text;
  bool restarted = false;
  std::string restart_text;
  double restart_loss = 0.0;
};

struct RunResult {
  RowMatrix best_theta;
  std::string best_text;
  double best_loss = 0.0;
  double best_accuracy = 0.0;
  std::string best_origin;
  int best_round = 0;
  int best_iteration = 0;
  std::vector<TrajectoryEvent> events;
  std::vector<RoundSummary> rounds;
  int gradient_steps = 0;
  int llm_calls = 0;
  int llm_failures = 0;
  int evaluations = 0;
  int dropped_words = 0;
};

// N alternating rounds of inner gradient descent and one LLM restart, then M
// final gradient iterations. Candidates are evaluated on their discretized
// prompts; the inner loop differentiates the soft theta. An exhausted-retry
// LLM failure degrades that round to gradient-only continuation and is
// logged, never fatal.
RunResult run(const RunConfig& config, const Objective& objective, const Vocabulary& vocab,
              LlmClient& client);

// Matched-budget baseline: rounds*inner_iterations + final_iterations plain
// gradient steps from the same seeded initialization.
RunResult run_gradient_only(const RunConfig& config, const Objective& objective,
                            const Vocabulary& vocab);

// Same loop shape as run() but every restart perturbs theta with seeded
// gaussian noise of scale config.noise_sigma instead of querying the LLM.
RunResult run_noise_restart(const RunConfig& config, const Objective& objective,
                            const Vocabulary& vocab);

// ---- ablation harness ----

struct AblationAxis {
  std::string name;                 // flags | rounds | inner-iters | metric | prompt-len
  std::vector<std::string> values;  // flags: "000".."111" as TD,MP,OT bits
};

struct AblationGrid {
  std::vector<AblationAxis> axes;
  std::vector<std::uint64_t> seeds;  // empty: use base config seed

  void validate() const;
};

struct AblationCell {
  int index = 0;
  std::map<std::string, std::string> assignment;  // axis name -> value
  bool failed = false;
  std::string error;
  int seeds_run = 0;
  double mean_loss = 0.0;
  double std_loss = 0.0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
};

using ClientFactory = std::function<std::unique_ptr<LlmClient>()>;
using CellRunSink = std::function<void(const AblationCell&, std::uint64_t seed, const RunResult&)>;

// Runs every cell of the cartesian grid over the seed list and aggregates
// mean/std of best loss and accuracy. A failing cell is reported in its row;
// the remaining cells still complete. The all-flags-off cell runs the
// noise-restart arm (no LLM involved).
std::vector<AblationCell> run_ablation(const AblationGrid& grid, const RunConfig& base_config,
                                       const Objective& objective, const Vocabulary& vocab,
                                       const ClientFactory& make_client,
                                       const CellRunSink& sink = nullptr);

// One tab-separated row per cell, stable header first.
std::string ablation_table(const std::vector<AblationCell>& cells);

}  // namespace promptopt
