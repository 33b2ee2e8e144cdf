// Operator CLI. Links the C API only; all domain work happens behind
// promptopt_c.h.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "promptopt/promptopt_c.h"

namespace {

using nlohmann::json;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir, llm, endpoint, model, metric, manual_prompt;
  std::optional<int> rounds, inner_iters, final_iters, topk, prompt_len;
  std::optional<double> noise_sigma;
};

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open config file " << path << "\n";
    std::exit(2);
  }
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    std::cerr << "error: config file " << path << " is not valid JSON: " << e.what() << "\n";
    std::exit(2);
  }
}

// flag > file > default
void apply_overrides(json& config, const Overrides& o) {
  auto section = [&](const char* name) -> json& {
    if (!config.contains(name) || !config[name].is_object()) config[name] = json::object();
    return config[name];
  };
  if (o.seed) section("run")["seed"] = *o.seed;
  if (o.rounds) section("run")["rounds"] = *o.rounds;
  if (o.inner_iters) section("run")["inner_iterations"] = *o.inner_iters;
  if (o.final_iters) section("run")["final_iterations"] = *o.final_iters;
  if (o.topk) section("run")["topk"] = *o.topk;
  if (o.prompt_len) section("run")["prompt_length"] = *o.prompt_len;
  if (o.metric) section("run")["metric"] = *o.metric;
  if (o.noise_sigma) section("run")["noise_sigma"] = *o.noise_sigma;
  if (o.llm) section("llm")["kind"] = *o.llm;
  if (o.endpoint) section("llm")["endpoint"] = *o.endpoint;
  if (o.model) section("llm")["model"] = *o.model;
  if (o.manual_prompt) {
    section("instruction")["manual_prompt"] = *o.manual_prompt;
    section("instruction")["include_manual_prompt"] = true;
  }
  if (o.out_dir) config["out_dir"] = *o.out_dir;
}

int exit_code(po_status status) {
  switch (status) {
    case PO_OK: return 0;
    case PO_ERR_CONFIG: return 2;
    case PO_ERR_OBJECTIVE: return 3;
    case PO_ERR_LLM: return 4;
    default: return 1;
  }
}

int fail(po_status status, const std::string& doing) {
  std::cerr << "error while " << doing << " (" << po_status_name(status)
            << "): " << po_last_error() << "\n";
  return exit_code(status);
}

std::string out_dir_of(const json& config) {
  return config.value("out_dir", std::string("out"));
}

struct TaskHandle {
  po_task* ptr = nullptr;
  ~TaskHandle() { po_task_free(ptr); }
};

struct ResultHandle {
  po_result* ptr = nullptr;
  ~ResultHandle() { po_result_free(ptr); }
};

int write_run_artifacts(po_result* result, const std::filesystem::path& dir,
                        const std::string& suffix) {
  std::filesystem::create_directories(dir);
  const std::string traj = (dir / ("trajectory" + suffix + ".jsonl")).string();
  const std::string summary = (dir / ("summary" + suffix + ".json")).string();
  const std::string curve = (dir / ("curve" + suffix + ".tsv")).string();
  if (po_status s = po_result_write_trajectory(result, traj.c_str()); s != PO_OK)
    return fail(s, "writing " + traj);
  if (po_status s = po_result_write_summary(result, summary.c_str()); s != PO_OK)
    return fail(s, "writing " + summary);
  if (po_status s = po_result_write_curve(result, curve.c_str()); s != PO_OK)
    return fail(s, "writing " + curve);
  std::cout << "wrote " << traj << "\n      " << summary << "\n      " << curve << "\n";
  return 0;
}

int run_command(const json& config, const std::string& kind,
                const std::vector<std::uint64_t>& seeds) {
  TaskHandle task;
  const std::string config_text = config.dump();
  if (po_status s = po_task_create(config_text.c_str(), &task.ptr); s != PO_OK)
    return fail(s, "building the task");

  std::vector<std::uint64_t> seed_list = seeds;
  if (seed_list.empty() &&
      config.contains("run") && config["run"].contains("seed"))
    seed_list.push_back(config["run"]["seed"].get<std::uint64_t>());
  if (seed_list.empty()) seed_list.push_back(1);

  const bool sweep = seed_list.size() > 1;
  int exit_rc = 0;
  for (std::uint64_t seed : seed_list) {
    json cfg = config;
    cfg["run"]["seed"] = seed;
    const std::string cfg_text = cfg.dump();
    ResultHandle result;
    if (po_status s = po_run(task.ptr, cfg_text.c_str(), kind.c_str(), &result.ptr); s != PO_OK)
      return fail(s, "running the optimizer");
    char line[512];
    std::snprintf(line, sizeof(line),
                  "%s seed=%llu best loss %.6f accuracy %.1f%% prompt \"%s\"", kind.c_str(),
                  static_cast<unsigned long long>(seed), po_result_best_loss(result.ptr),
                  po_result_best_accuracy(result.ptr), po_result_best_text(result.ptr));
    std::cout << line << "\n";
    const std::string suffix = sweep ? "_seed" + std::to_string(seed) : "";
    if (int rc = write_run_artifacts(result.ptr, out_dir_of(cfg), suffix); rc != 0) return rc;

    // results were still written, but a run where no LLM call ever succeeded
    // is a transport exhaustion at the command level
    const int calls = po_result_llm_calls(result.ptr);
    if (calls > 0 && po_result_llm_failures(result.ptr) == calls) {
      std::cerr << "warning: every LLM call failed; seed " << seed
                << " degraded to gradient-only\n";
      exit_rc = 4;
    }
  }
  return exit_rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Combined gradient + LLM prompt optimizer"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides o;
  app.add_option("--config", config_path, "configuration file (JSON)");
  app.add_option("--seed", o.seed, "run seed");
  app.add_option("--out", o.out_dir, "output directory");
  app.add_option("--llm", o.llm, "LLM client: http, scripted, oracle, neighborhood");
  app.add_option("--endpoint", o.endpoint, "chat-completions endpoint URL");
  app.add_option("--model", o.model, "model name for the http client");
  app.add_option("--metric", o.metric, "projection metric: l2 or cosine");
  app.add_option("--rounds", o.rounds, "alternating rounds N");
  app.add_option("--inner-iters", o.inner_iters, "gradient iterations per round m");
  app.add_option("--final-iters", o.final_iters, "final convergence iterations M");
  app.add_option("--topk", o.topk, "top-k candidates shown to the LLM");
  app.add_option("--prompt-len", o.prompt_len, "prompt length L for random init");
  app.add_option("--manual-prompt", o.manual_prompt, "manual prompt template (enables MP)");
  app.add_option("--noise-sigma", o.noise_sigma, "restart noise scale (noise baseline)");

  auto* gen = app.add_subcommand("gen-task", "generate a synthetic task directory");

  std::vector<std::uint64_t> seeds;
  auto* run_cmd = app.add_subcommand("run", "run the combined optimizer");
  run_cmd->add_option("--seeds", seeds, "run once per seed")->delimiter(',');

  std::string baseline_kind = "gradient";
  auto* baseline = app.add_subcommand("baseline", "run a baseline arm");
  baseline->add_option("--kind", baseline_kind, "gradient or noise")
      ->check(CLI::IsMember({"gradient", "gradient_only", "noise", "noise_restart"}));
  baseline->add_option("--seeds", seeds, "run once per seed")->delimiter(',');

  std::vector<std::string> axis_specs;
  std::vector<std::uint64_t> ablate_seeds;
  auto* ablate = app.add_subcommand("ablate", "sweep an ablation grid");
  ablate->add_option("--axis", axis_specs,
                     "axis as name=v1,v2,... (flags, rounds, inner-iters, metric, prompt-len)")
      ->required();
  ablate->add_option("--seeds", ablate_seeds, "seeds per cell")->delimiter(',');

  std::vector<std::string> trajectory_files;
  auto* report = app.add_subcommand("report", "render report text + SVG from trajectories");
  report->add_option("trajectories", trajectory_files, "trajectory .jsonl files")
      ->required()
      ->check(CLI::ExistingFile);

  for (CLI::App* sub : {gen, run_cmd, baseline, ablate, report}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  json config = load_config_file(config_path);
  if (!config.is_object()) {
    std::cerr << "error: configuration root must be a JSON object\n";
    return 2;
  }
  apply_overrides(config, o);
  const std::string config_text = config.dump();

  if (gen->parsed()) {
    const std::string dir = out_dir_of(config);
    if (po_status s = po_task_generate(config_text.c_str(), dir.c_str()); s != PO_OK)
      return fail(s, "generating the task");
    TaskHandle task;
    if (po_status s = po_task_create(config_text.c_str(), &task.ptr); s == PO_OK) {
      double planted_loss = 0.0;
      po_task_planted_loss(task.ptr, &planted_loss);
      std::cout << "task written to " << dir << " (vocab " << po_task_vocab_size(task.ptr)
                << " x " << po_task_dim(task.ptr) << ", planted \""
                << po_task_planted_text(task.ptr) << "\", loss " << planted_loss << ")\n";
    }
    return 0;
  }

  if (run_cmd->parsed()) return run_command(config, "combined", seeds);

  if (baseline->parsed()) {
    const std::string kind =
        (baseline_kind == "noise" || baseline_kind == "noise_restart") ? "noise_restart"
                                                                       : "gradient_only";
    return run_command(config, kind, seeds);
  }

  if (ablate->parsed()) {
    json axes = json::array();
    for (const std::string& spec : axis_specs) {
      const size_t eq = spec.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size()) {
        std::cerr << "error: --axis needs name=v1,v2,... got '" << spec << "'\n";
        return 2;
      }
      json values = json::array();
      std::string rest = spec.substr(eq + 1);
      size_t pos = 0;
      while (pos <= rest.size()) {
        const size_t comma = rest.find(',', pos);
        const std::string v = rest.substr(pos, comma == std::string::npos ? comma : comma - pos);
        if (!v.empty()) values.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      axes.push_back(json{{"name", spec.substr(0, eq)}, {"values", values}});
    }
    json grid = {{"axes", axes}};
    if (!ablate_seeds.empty()) grid["seeds"] = ablate_seeds;

    TaskHandle task;
    if (po_status s = po_task_create(config_text.c_str(), &task.ptr); s != PO_OK)
      return fail(s, "building the task");
    const std::string dir = out_dir_of(config);
    char* table = nullptr;
    const std::string grid_text = grid.dump();
    if (po_status s = po_ablate(task.ptr, config_text.c_str(), grid_text.c_str(), dir.c_str(),
                                &table);
        s != PO_OK)
      return fail(s, "running the ablation grid");
    std::cout << table;
    po_string_free(table);
    std::cout << "table written to " << (std::filesystem::path(dir) / "ablation.tsv").string()
              << "\n";
    return 0;
  }

  if (report->parsed()) {
    const std::filesystem::path dir = out_dir_of(config);
    std::filesystem::create_directories(dir);
    const std::string text_path = (dir / "report.txt").string();
    const std::string svg_path = (dir / "report.svg").string();
    std::vector<const char*> paths;
    paths.reserve(trajectory_files.size());
    for (const auto& p : trajectory_files) paths.push_back(p.c_str());
    if (po_status s = po_report(paths.data(), paths.size(), text_path.c_str(), svg_path.c_str());
        s != PO_OK)
      return fail(s, "rendering the report");
    std::cout << "wrote " << text_path << "\n      " << svg_path << "\n";
    return 0;
  }

  return 0;
}
