#pragma once

#include <string>

#include <json.hpp>

#include "promptopt/config.hpp"
#include "promptopt/orchestrator.hpp"

namespace promptopt {

enum class RunKind { combined, gradient_only, noise_restart };

RunKind parse_run_kind(const std::string& name);

struct RunOutput {
  RunResult result;
  nlohmann::json summary;  // config echo, best candidate, per-round minima, counters
};

// Builds the task's client (combined arm only) and executes the selected arm.
RunOutput execute_run(const AppConfig& config, const SyntheticTask& task, RunKind kind);

// trajectory: one JSON event per line. curve: tab-separated eval rows
// (index, loss, accuracy) covering every evaluated candidate in order.
void write_trajectory_file(const RunResult& result, const std::string& path);
void write_curve_file(const RunResult& result, const std::string& path);
void write_summary_file(const RunOutput& output, const std::string& path);

// Runs the grid, writing ablation.tsv plus one trajectory per (cell, seed)
// under out_dir. Returns the table text.
std::string execute_ablation(const AppConfig& config, const SyntheticTask& task,
                             const AblationGrid& grid, const std::string& out_dir);

SyntheticTask task_from_config(const AppConfig& config);

}  // namespace promptopt
