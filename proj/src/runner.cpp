#include "promptopt/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "promptopt/task_io.hpp"

namespace promptopt {

RunKind parse_run_kind(const std::string& name) {
  if (name == "combined") return RunKind::combined;
  if (name == "gradient_only" || name == "gradient") return RunKind::gradient_only;
  if (name == "noise_restart" || name == "noise") return RunKind::noise_restart;
  throw Error(Errc::config, "unknown run kind '" + name + "'");
}

SyntheticTask task_from_config(const AppConfig& config) {
  if (config.task_from_files) return load_task(config.task_dir);
  return make_synthetic_task(config.task_spec);
}

RunOutput execute_run(const AppConfig& config, const SyntheticTask& task, RunKind kind) {
  RunOutput out;
  switch (kind) {
    case RunKind::combined: {
      auto client = make_client(config, task);
      out.result = run(config.run, *task.objective, *task.vocab, *client);
      break;
    }
    case RunKind::gradient_only:
      out.result = run_gradient_only(config.run, *task.objective, *task.vocab);
      break;
    case RunKind::noise_restart:
      out.result = run_noise_restart(config.run, *task.objective, *task.vocab);
      break;
  }

  nlohmann::json rounds = nlohmann::json::array();
  for (const RoundSummary& r : out.result.rounds) {
    nlohmann::json jr = {{"round", r.round},
                         {"best_loss", r.best_loss},
                         {"best_accuracy", r.best_accuracy},
                         {"best_text", r.best_text}};
    if (r.restarted) {
      jr["restart_text"] = r.restart_text;
      jr["restart_loss"] = r.restart_loss;
    }
    rounds.push_back(std::move(jr));
  }
  out.summary = {
      {"config", app_config_to_json(config)},
      {"best",
       {{"text", out.result.best_text},
        {"loss", out.result.best_loss},
        {"accuracy", out.result.best_accuracy},
        {"origin", out.result.best_origin},
        {"round", out.result.best_round},
        {"iteration", out.result.best_iteration}}},
      {"rounds", rounds},
      {"counters",
       {{"gradient_steps", out.result.gradient_steps},
        {"evaluations", out.result.evaluations},
        {"llm_calls", out.result.llm_calls},
        {"llm_failures", out.result.llm_failures},
        {"dropped_words", out.result.dropped_words}}}};
  return out;
}

void write_trajectory_file(const RunResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path);
  TrajectoryLog log;
  for (const TrajectoryEvent& e : result.events) log.append(e);
  log.flush(out);
}

void write_curve_file(const RunResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path);
  out << "iteration\tloss\taccuracy\n";
  char buf[64];
  int index = 0;
  for (const TrajectoryEvent& e : result.events) {
    if (e.kind != "eval") continue;
    out << ++index;
    std::snprintf(buf, sizeof(buf), "%.17g", e.loss);
    out << '\t' << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", e.accuracy);
    out << '\t' << buf << '\n';
  }
  if (!out.flush()) throw Error(Errc::io, "write failure on " + path);
}

void write_summary_file(const RunOutput& output, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path);
  out << output.summary.dump(2) << '\n';
  if (!out.flush()) throw Error(Errc::io, "write failure on " + path);
}

std::string execute_ablation(const AppConfig& config, const SyntheticTask& task,
                             const AblationGrid& grid, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path base(out_dir);

  const auto sink = [&](const AblationCell& cell, std::uint64_t seed, const RunResult& result) {
    const std::string name =
        "cell" + std::to_string(cell.index) + "_seed" + std::to_string(seed) + ".jsonl";
    write_trajectory_file(result, (base / name).string());
  };

  const auto cells = run_ablation(grid, config.run, *task.objective, *task.vocab,
                                  [&] { return make_client(config, task); }, sink);
  const std::string table = ablation_table(cells);

  std::ofstream tf(base / "ablation.tsv");
  if (!tf) throw Error(Errc::io, "cannot write ablation table in " + out_dir);
  tf << table;
  if (!tf.flush()) throw Error(Errc::io, "write failure on ablation table");
  return table;
}

}  // namespace promptopt
