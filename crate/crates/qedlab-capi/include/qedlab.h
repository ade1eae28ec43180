/* C ABI for the qedlab scheduling laboratory. Generated by cbindgen; do not edit. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every API call.
typedef enum QedStatus {
  QED_OK = 0,
  // A pointer was null or a buffer length did not match the class count.
  QED_INVALID_ARGUMENT = 1,
  // The config TOML failed to parse or validate.
  QED_PARSE_ERROR = 2,
  // The HJB solve failed.
  QED_SOLVER_ERROR = 3,
  // A simulation failed (invariant breach or policy contract violation).
  QED_SIMULATION_ERROR = 4,
  // The call needs a solved model; call qed_model_solve first.
  QED_NOT_SOLVED = 5,
  // A panic was caught at the FFI boundary.
  QED_PANIC = 6,
} QedStatus;

// Opaque model handle.
typedef struct QedModel QedModel;

// Aggregate result of a batch of queue-simulation replications.
typedef struct QedSimSummary {
  double mean_cost;
  double std_error;
  double horizon;
  // Max over classes of the abandonment-identity gap in SE units.
  double lemma1_gap_max_se;
  uint64_t wc_violations;
  uint64_t np_violations;
  uint64_t event_count;
} QedSimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread.
const char *qed_last_error_message(void);

// Parses and validates an experiment config (TOML text) into a model
// handle. On success writes the handle to `out`; free with qed_model_free.
//
// # Safety
// `config_toml` must be a valid NUL-terminated string and `out` a valid
// pointer.
enum QedStatus qed_model_new(const char *config_toml, struct QedModel **out);

// Releases a model handle. A null handle is a no-op.
//
// # Safety
// `model` must be a handle from qed_model_new that has not been freed.
void qed_model_free(struct QedModel *model);

// Number of customer classes k of the model.
//
// # Safety
// `model` must be a live handle.
size_t qed_model_class_count(const struct QedModel *model);

// Solves the configured HJB problem and stores the value grid plus the
// extracted Markov policy inside the handle.
//
// # Safety
// `model` must be a live handle.
enum QedStatus qed_model_solve(struct QedModel *model);

// Interpolated value function at `x` (length k); clamped to the grid box.
//
// # Safety
// `model` must be a live handle, `x` an array of length `len`, `out` valid.
enum QedStatus qed_model_value_at(const struct QedModel *model,
                                  const double *x,
                                  size_t len,
                                  double *out);

// Interpolated simplex policy at `x`; writes k components into `out_u`.
//
// # Safety
// `model` must be a live handle, `x` and `out_u` arrays of length `len`.
enum QedStatus qed_model_policy_at(const struct QedModel *model,
                                   const double *x,
                                   size_t len,
                                   double *out_u);

// Writes the solved grid as CSV.
//
// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
enum QedStatus qed_model_grid_save_csv(const struct QedModel *model, const char *path);

// Runs `reps` queue-simulation replications of policy descriptor `policy`
// (pscp, nscp1, nscp2\[:e\], prio:i,j,..., cmu, cmutheta) at system size `n`
// from the config's x0, with seeds base_seed, base_seed+1, ... The horizon
// comes from the config's tail rule. Policies driven by the Markov policy
// require a solved model.
//
// # Safety
// `model` must be a live handle, `policy` NUL-terminated, `out` valid.
enum QedStatus qed_model_simulate(struct QedModel *model,
                                  uint64_t n,
                                  const char *policy,
                                  size_t reps,
                                  uint64_t base_seed,
                                  struct QedSimSummary *out);

// Library version as a static string.
const char *qed_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
