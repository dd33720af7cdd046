#ifndef PTCFLOW_H
#define PTCFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes of every fallible call.
typedef enum PtcStatus {
  PTC_STATUS_OK = 0,
  // A required pointer argument was null.
  PTC_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  PTC_STATUS_INVALID_STRING = 2,
  // Invalid configuration, unknown name or out-of-range parameter.
  PTC_STATUS_CONFIG = 3,
  // Singular matrix, non-finite values or another numerical failure.
  PTC_STATUS_NUMERIC = 4,
  // File could not be read or written.
  PTC_STATUS_IO = 5,
  // Malformed file contents.
  PTC_STATUS_FORMAT = 6,
  // The output buffer is shorter than the data; the required length was
  // stored.
  PTC_STATUS_BUFFER_TOO_SMALL = 7,
  // An internal panic was caught.
  PTC_STATUS_PANIC = 8,
} PtcStatus;

// A trained step-size model for the `nn` strategy.
typedef struct PtcModel PtcModel;

// A meshed case ready to solve.
typedef struct PtcProblem PtcProblem;

// The outcome of one solve.
typedef struct PtcReport PtcReport;

// Stopping rule of a solve.
typedef struct PtcSolveOptions {
  // Relative residual reduction at which the solve counts as converged.
  double tol;
  size_t max_iter;
} PtcSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next call into the library from the same thread.
const char *ptc_last_error(void);

// Library version as a static NUL-terminated string.
const char *ptc_version(void);

// The iteration-count CFL schedule at step `n` (1-based).
//
// # Safety
// `out` must be valid for a write.
enum PtcStatus ptc_cfl_iter(size_t n, double *out);

// Defaults: `tol = 1e-6`, `max_iter = 100`.
struct PtcSolveOptions ptc_solve_options_default(void);

// Meshes case `case_id` of a built-in suite (`desk`, `full`, `desk-data`).
//
// # Safety
// String arguments must be NUL-terminated; `out` must be valid for a write.
enum PtcStatus ptc_problem_from_preset(const char *preset_name,
                                       const char *case_id,
                                       struct PtcProblem **out);

// Meshes case `case_id` of a suite given as configuration text (the
// format read by `ptcflow bench --config`).
//
// # Safety
// String arguments must be NUL-terminated; `out` must be valid for a write.
enum PtcStatus ptc_problem_from_config(const char *config_text,
                                       const char *case_id,
                                       struct PtcProblem **out);

// # Safety
// `problem` must come from this library and not be used afterwards; null
// is ignored.
void ptc_problem_free(struct PtcProblem *problem);

// Number of triangles, or 0 for a null handle.
//
// # Safety
// `problem` must be null or a live handle.
size_t ptc_problem_num_elements(const struct PtcProblem *problem);

// Unknowns `(u, v, p)` per vertex, interleaved; 0 for a null handle.
//
// # Safety
// `problem` must be null or a live handle.
size_t ptc_problem_num_dofs(const struct PtcProblem *problem);

// The case's own stopping rule.
//
// # Safety
// `problem` must be a live handle; `out` must be valid for a write.
enum PtcStatus ptc_problem_solve_options(const struct PtcProblem *problem,
                                         struct PtcSolveOptions *out);

// Loads a model file written by `ptcflow train`.
//
// # Safety
// `path` must be NUL-terminated; `out` must be valid for a write.
enum PtcStatus ptc_model_load(const char *path, struct PtcModel **out);

// # Safety
// `model` must come from this library and not be used afterwards; null is
// ignored.
void ptc_model_free(struct PtcModel *model);

// Number of features the model expects.
//
// # Safety
// `model` must be null or a live handle.
size_t ptc_model_input_dim(const struct PtcModel *model);

// Time step predicted for one raw feature vector, before clipping.
//
// # Safety
// `features` must point to `len` readable values; `out` must be valid for
// a write.
enum PtcStatus ptc_model_predict_dt(const struct PtcModel *model,
                                    const double *features,
                                    size_t len,
                                    double *out);

// Solves `problem` with `strategy` (`iter`, `err`, `nn`, `nc`, `an`).
// `model` is required for `nn` and ignored otherwise. Non-convergence is a
// successful call; inspect the report.
//
// # Safety
// Handles must be live (`model` may be null); `strategy` must be
// NUL-terminated; `out` must be valid for a write.
enum PtcStatus ptc_solve(const struct PtcProblem *problem,
                         const char *strategy,
                         const struct PtcModel *model,
                         struct PtcSolveOptions options,
                         struct PtcReport **out);

// # Safety
// `report` must come from this library and not be used afterwards; null is
// ignored.
void ptc_report_free(struct PtcReport *report);

// # Safety
// `report` must be null or a live handle.
bool ptc_report_converged(const struct PtcReport *report);

// Steps taken.
//
// # Safety
// `report` must be null or a live handle.
size_t ptc_report_iterations(const struct PtcReport *report);

// Residual norms, initial one first (`iterations + 1` values). With
// `len` too small nothing is copied, `BUFFER_TOO_SMALL` is returned and
// the required length is stored in `needed` (if not null).
//
// # Safety
// `buf` must be writable for `len` values; `needed` may be null.
enum PtcStatus ptc_report_residuals(const struct PtcReport *report,
                                    double *buf,
                                    size_t len,
                                    size_t *needed);

// Final iterate, `(u, v, p)` interleaved per vertex. Buffer handling as in
// [`ptc_report_residuals`].
//
// # Safety
// `buf` must be writable for `len` values; `needed` may be null.
enum PtcStatus ptc_report_state(const struct PtcReport *report,
                                double *buf,
                                size_t len,
                                size_t *needed);

// Writes the convergence history as CSV.
//
// # Safety
// `report` must be a live handle; `path` must be NUL-terminated.
enum PtcStatus ptc_report_write_csv(const struct PtcReport *report, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PTCFLOW_H */
