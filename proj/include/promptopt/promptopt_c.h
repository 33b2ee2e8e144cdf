/* C interface to the prompt-optimization core. All functions return a
 * po_status; po_last_error() holds a thread-local message for the most
 * recent failure. Handles are opaque and must be released with the matching
 * _free function. Returned strings point into handle-owned storage and stay
 * valid until the handle is freed. */
#ifndef PROMPTOPT_C_H
#define PROMPTOPT_C_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum po_status {
  PO_OK = 0,
  PO_ERR_INVALID_ARG = 1,
  PO_ERR_CONFIG = 2,    /* bad configuration document or values */
  PO_ERR_OBJECTIVE = 3, /* numeric/objective failure (shapes, non-finite) */
  PO_ERR_LLM = 4,       /* LLM transport exhaustion or timeout */
  PO_ERR_IO = 5,
  PO_ERR_PARSE = 6,
  PO_ERR_INTERNAL = 7
} po_status;

const char* po_status_name(po_status status);
const char* po_last_error(void);
const char* po_version(void);

/* ---- tasks -------------------------------------------------------------- */

typedef struct po_task po_task;

/* Builds the task described by the "task" section of the configuration JSON
 * (synthetic spec or a saved task directory). */
po_status po_task_create(const char* config_json, po_task** out);

/* Generates the synthetic task from the configuration and writes the task
 * files (token sidecar, embedding matrix, samples, manifest) into out_dir. */
po_status po_task_generate(const char* config_json, const char* out_dir);

void po_task_free(po_task* task);

/* Planted near-optimal prompt; NULL when the task has none. */
const char* po_task_planted_text(const po_task* task);
po_status po_task_planted_loss(const po_task* task, double* out);
int po_task_vocab_size(const po_task* task);
int po_task_dim(const po_task* task);

/* ---- runs --------------------------------------------------------------- */

typedef struct po_result po_result;

/* kind: "combined", "gradient_only" or "noise_restart". The LLM client is
 * built from the configuration's "llm" section. */
po_status po_run(const po_task* task, const char* config_json, const char* kind,
                 po_result** out);

void po_result_free(po_result* result);

double po_result_best_loss(const po_result* result);
double po_result_best_accuracy(const po_result* result);
const char* po_result_best_text(const po_result* result);
int po_result_gradient_steps(const po_result* result);
int po_result_evaluations(const po_result* result);
int po_result_llm_calls(const po_result* result);
int po_result_llm_failures(const po_result* result);

/* Run summary as a JSON document (config echo, best, per-round minima). */
const char* po_result_summary_json(const po_result* result);

po_status po_result_write_trajectory(const po_result* result, const char* path);
po_status po_result_write_summary(const po_result* result, const char* path);
po_status po_result_write_curve(const po_result* result, const char* path);

/* ---- ablation and reports ----------------------------------------------- */

/* Runs the grid described by grid_json ({"axes":[{"name","values"}],
 * "seeds":[...]}) and writes ablation.tsv plus per-cell trajectories into
 * out_dir. *table_out, when non-NULL, receives a heap copy of the table text
 * to be released with po_string_free. */
po_status po_ablate(const po_task* task, const char* config_json, const char* grid_json,
                    const char* out_dir, char** table_out);

/* Renders report text + SVG chart from trajectory files. */
po_status po_report(const char* const* trajectory_paths, size_t n_paths, const char* text_path,
                    const char* svg_path);

void po_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* PROMPTOPT_C_H */
