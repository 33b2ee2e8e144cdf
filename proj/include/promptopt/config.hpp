#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "promptopt/clients.hpp"
#include "promptopt/objective.hpp"
#include "promptopt/orchestrator.hpp"

namespace promptopt {

struct LlmSelection {
  enum class Kind { scripted, oracle, neighborhood, http };
  Kind kind = Kind::neighborhood;
  HttpClientConfig http;
  std::vector<std::string> script;
  std::optional<std::uint64_t> seed;  // neighborhood; defaults to the run seed
};

// The full configuration document: task source, run parameters, instruction
// flags, LLM transport. Flags merged by the CLI take precedence over file
// values, which take precedence over the defaults baked in here.
struct AppConfig {
  bool task_from_files = false;
  std::string task_dir;
  SyntheticTaskSpec task_spec;
  RunConfig run;
  LlmSelection llm;
  std::string out_dir = "out";
};

// Parses and validates a configuration document. Unknown keys and malformed
// values fail fast with Errc::config.
AppConfig parse_app_config(const nlohmann::json& document);
AppConfig parse_app_config_text(const std::string& text);

// Effective-config echo (embedded into run summaries).
nlohmann::json app_config_to_json(const AppConfig& config);

const char* llm_kind_name(LlmSelection::Kind kind);

// Builds the configured client. The oracle client requires a task with a
// planted prompt; the neighborhood client draws on the task vocabulary.
std::unique_ptr<LlmClient> make_client(const AppConfig& config, const SyntheticTask& task);

// Parses {"axes":[{"name":..,"values":[..]}],"seeds":[..]} into a grid.
AblationGrid parse_ablation_grid(const nlohmann::json& document);

}  // namespace promptopt
