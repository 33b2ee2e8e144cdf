#include "promptopt/promptopt_c.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "promptopt/config.hpp"
#include "promptopt/report.hpp"
#include "promptopt/runner.hpp"
#include "promptopt/task_io.hpp"

using namespace promptopt;

struct po_task {
  SyntheticTask task;
  std::string planted_text;
};

struct po_result {
  RunOutput output;
  std::string summary_text;
};

namespace {

thread_local std::string g_last_error;

po_status status_of(Errc code) {
  switch (code) {
    case Errc::config:
    case Errc::all_tokens_unknown:
      return PO_ERR_CONFIG;
    case Errc::shape_mismatch:
    case Errc::non_finite_gradient:
    case Errc::zero_vector_under_cosine:
      return PO_ERR_OBJECTIVE;
    case Errc::llm_transport:
    case Errc::llm_timeout:
      return PO_ERR_LLM;
    case Errc::io:
      return PO_ERR_IO;
    case Errc::parse:
    case Errc::no_templates_parsed:
      return PO_ERR_PARSE;
    case Errc::empty_pool:
    case Errc::missing_trajectory:
    case Errc::internal:
      return PO_ERR_INTERNAL;
  }
  return PO_ERR_INTERNAL;
}

template <typename Fn>
po_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return PO_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PO_ERR_INTERNAL;
  }
}

po_status invalid_arg(const char* what) {
  g_last_error = what;
  return PO_ERR_INVALID_ARG;
}

}  // namespace

extern "C" {

const char* po_status_name(po_status status) {
  switch (status) {
    case PO_OK: return "ok";
    case PO_ERR_INVALID_ARG: return "invalid_argument";
    case PO_ERR_CONFIG: return "config_error";
    case PO_ERR_OBJECTIVE: return "objective_error";
    case PO_ERR_LLM: return "llm_error";
    case PO_ERR_IO: return "io_error";
    case PO_ERR_PARSE: return "parse_error";
    case PO_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* po_last_error(void) { return g_last_error.c_str(); }

const char* po_version(void) { return "0.1.0"; }

po_status po_task_create(const char* config_json, po_task** out) {
  if (!config_json || !out) return invalid_arg("po_task_create: null argument");
  *out = nullptr;
  return guarded([&] {
    const AppConfig config = parse_app_config_text(config_json);
    auto handle = std::make_unique<po_task>();
    handle->task = task_from_config(config);
    handle->planted_text = handle->task.planted_prompt.text;
    *out = handle.release();
  });
}

po_status po_task_generate(const char* config_json, const char* out_dir) {
  if (!config_json || !out_dir) return invalid_arg("po_task_generate: null argument");
  return guarded([&] {
    const AppConfig config = parse_app_config_text(config_json);
    if (config.task_from_files)
      throw Error(Errc::config, "task generation needs a synthetic task spec, not task files");
    save_task(make_synthetic_task(config.task_spec), out_dir);
  });
}

void po_task_free(po_task* task) { delete task; }

const char* po_task_planted_text(const po_task* task) {
  if (!task || task->planted_text.empty()) return nullptr;
  return task->planted_text.c_str();
}

po_status po_task_planted_loss(const po_task* task, double* out) {
  if (!task || !out) return invalid_arg("po_task_planted_loss: null argument");
  return guarded([&] {
    const RowMatrix theta = embed(task->task.planted_prompt, *task->task.vocab);
    *out = task->task.objective->loss(theta);
  });
}

int po_task_vocab_size(const po_task* task) { return task ? task->task.vocab->size() : 0; }

int po_task_dim(const po_task* task) { return task ? task->task.vocab->dim() : 0; }

po_status po_run(const po_task* task, const char* config_json, const char* kind,
                 po_result** out) {
  if (!task || !config_json || !kind || !out) return invalid_arg("po_run: null argument");
  *out = nullptr;
  return guarded([&] {
    const AppConfig config = parse_app_config_text(config_json);
    auto handle = std::make_unique<po_result>();
    handle->output = execute_run(config, task->task, parse_run_kind(kind));
    handle->summary_text = handle->output.summary.dump(2);
    *out = handle.release();
  });
}

void po_result_free(po_result* result) { delete result; }

double po_result_best_loss(const po_result* result) {
  return result ? result->output.result.best_loss : 0.0;
}

double po_result_best_accuracy(const po_result* result) {
  return result ? result->output.result.best_accuracy : 0.0;
}

const char* po_result_best_text(const po_result* result) {
  return result ? result->output.result.best_text.c_str() : nullptr;
}

int po_result_gradient_steps(const po_result* result) {
  return result ? result->output.result.gradient_steps : 0;
}

int po_result_evaluations(const po_result* result) {
  return result ? result->output.result.evaluations : 0;
}

int po_result_llm_calls(const po_result* result) {
  return result ? result->output.result.llm_calls : 0;
}

int po_result_llm_failures(const po_result* result) {
  return result ? result->output.result.llm_failures : 0;
}

const char* po_result_summary_json(const po_result* result) {
  return result ? result->summary_text.c_str() : nullptr;
}

po_status po_result_write_trajectory(const po_result* result, const char* path) {
  if (!result || !path) return invalid_arg("po_result_write_trajectory: null argument");
  return guarded([&] { write_trajectory_file(result->output.result, path); });
}

po_status po_result_write_summary(const po_result* result, const char* path) {
  if (!result || !path) return invalid_arg("po_result_write_summary: null argument");
  return guarded([&] { write_summary_file(result->output, path); });
}

po_status po_result_write_curve(const po_result* result, const char* path) {
  if (!result || !path) return invalid_arg("po_result_write_curve: null argument");
  return guarded([&] { write_curve_file(result->output.result, path); });
}

po_status po_ablate(const po_task* task, const char* config_json, const char* grid_json,
                    const char* out_dir, char** table_out) {
  if (!task || !config_json || !grid_json || !out_dir)
    return invalid_arg("po_ablate: null argument");
  return guarded([&] {
    const AppConfig config = parse_app_config_text(config_json);
    nlohmann::json grid_doc;
    try {
      grid_doc = nlohmann::json::parse(grid_json);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::config, std::string("grid is not valid JSON: ") + e.what());
    }
    const AblationGrid grid = parse_ablation_grid(grid_doc);
    const std::string table = execute_ablation(config, task->task, grid, out_dir);
    if (table_out) {
      *table_out = static_cast<char*>(std::malloc(table.size() + 1));
      if (!*table_out) throw Error(Errc::internal, "out of memory");
      std::memcpy(*table_out, table.c_str(), table.size() + 1);
    }
  });
}

po_status po_report(const char* const* trajectory_paths, size_t n_paths, const char* text_path,
                    const char* svg_path) {
  if (!trajectory_paths || !text_path || !svg_path) return invalid_arg("po_report: null argument");
  return guarded([&] {
    std::vector<std::string> paths;
    paths.reserve(n_paths);
    for (size_t i = 0; i < n_paths; ++i) {
      if (!trajectory_paths[i]) throw Error(Errc::config, "null trajectory path");
      paths.emplace_back(trajectory_paths[i]);
    }
    write_report(paths, text_path, svg_path);
  });
}

void po_string_free(char* s) { std::free(s); }

}  // extern "C"
