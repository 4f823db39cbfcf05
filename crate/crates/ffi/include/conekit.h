#ifndef CONEKIT_H
#define CONEKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ConekitStatus {
  CONEKIT_STATUS_OK = 0,
  CONEKIT_STATUS_NULL_POINTER = 1,
  CONEKIT_STATUS_PANIC = 2,
  CONEKIT_STATUS_CONE_VIOLATION = 10,
  CONEKIT_STATUS_SHAPE_MISMATCH = 11,
  CONEKIT_STATUS_DOMAIN_ERROR = 12,
  CONEKIT_STATUS_ASSUMPTION_VIOLATION = 13,
  CONEKIT_STATUS_NO_DEFAULT = 14,
  CONEKIT_STATUS_INTERNAL_ORDER_ERROR = 15,
  CONEKIT_STATUS_MAX_ITERS_EXCEEDED = 16,
  CONEKIT_STATUS_NONFINITE_STATE = 17,
  CONEKIT_STATUS_CLAMP_BUDGET_EXCEEDED = 18,
  CONEKIT_STATUS_INCOMPATIBLE_GRID = 19,
  CONEKIT_STATUS_STEP_TOO_LARGE = 20,
  CONEKIT_STATUS_INVALID_KERNEL = 21,
  CONEKIT_STATUS_INVALID_CONFIG = 22,
  CONEKIT_STATUS_GRID_MISMATCH = 23,
  CONEKIT_STATUS_IO_ERROR = 24,
} ConekitStatus;

typedef enum ConekitKernel {
  CONEKIT_KERNEL_CONSTANT = 0,
  CONEKIT_KERNEL_ADDITIVE = 1,
  CONEKIT_KERNEL_MULTIPLICATIVE = 2,
} ConekitKernel;

/**
 * Opaque model handle.
 */
typedef struct ConekitModel ConekitModel;

/**
 * Opaque solve result.
 */
typedef struct ConekitResult ConekitResult;

/**
 * `a(x) = intercept + slope * x`
 */
typedef struct ConekitEnvelope {
  double intercept;
  double slope;
} ConekitEnvelope;

typedef struct ConekitSolverConfig {
  double tol_abs;
  double tol_rel;
  size_t max_iters;
  /**
   * Nonzero to audit the model before solving.
   */
  int32_t audit_first;
} ConekitSolverConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *conekit_version(void);

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next `conekit_*` call on the same thread.
 */
const char *conekit_last_error_message(void);

/**
 * Model with `λ_k = lambda0 + k` and the default envelopes for `kernel`.
 * `kappa` is used by the constant kernel only.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
enum ConekitStatus conekit_model_new(enum ConekitKernel kernel,
                                     double kappa,
                                     size_t sizes,
                                     double lambda0,
                                     struct ConekitModel **out);

/**
 * Model from a symmetric `n x n` rate table (row-major, 0-based sizes)
 * with caller-supplied envelopes and `Λ₁ = Λ`.
 *
 * # Safety
 * `rates` must point to `n * n` doubles and `out` must be valid for writing.
 */
enum ConekitStatus conekit_model_new_tabulated(const double *rates,
                                               size_t n,
                                               size_t sizes,
                                               double lambda0,
                                               struct ConekitEnvelope a_env,
                                               struct ConekitEnvelope rho_env,
                                               struct ConekitModel **out);

/**
 * Replaces the envelopes of `model`.
 *
 * # Safety
 * `model` must be a live handle.
 */
enum ConekitStatus conekit_model_set_envelopes(struct ConekitModel *model,
                                               struct ConekitEnvelope a_env,
                                               struct ConekitEnvelope rho_env);

/**
 * Sets a per-cell kernel multiplier of length `cells`.
 *
 * # Safety
 * `model` must be a live handle and `modulation` must point to `cells` doubles.
 */
enum ConekitStatus conekit_model_set_modulation(struct ConekitModel *model,
                                                const double *modulation,
                                                size_t cells);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void conekit_model_free(struct ConekitModel *model);

/**
 * Runs the assumption audit. `failed` receives the number of failing
 * checks, whose names are then in [`conekit_last_error_message`].
 *
 * # Safety
 * `model` must be a live handle and `failed` valid for writing.
 */
enum ConekitStatus conekit_audit(const struct ConekitModel *model,
                                 size_t samples,
                                 uint64_t seed,
                                 size_t *failed);

/**
 * Solves on `steps` uniform steps over `[0, horizon]`. `f0` holds
 * `sizes * cells` values, cell by cell. `cfg` may be null for defaults.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `out` valid for writing.
 */
enum ConekitStatus conekit_solve(const struct ConekitModel *model,
                                 const double *f0,
                                 size_t len,
                                 size_t cells,
                                 double horizon,
                                 size_t steps,
                                 const struct ConekitSolverConfig *cfg,
                                 struct ConekitResult **out);

/**
 * Like [`conekit_solve`] with periodic advection at `speed` cells per unit
 * time. The result holds the lab-frame trajectory.
 *
 * # Safety
 * As for [`conekit_solve`].
 */
enum ConekitStatus conekit_solve_transport(const struct ConekitModel *model,
                                           const double *f0,
                                           size_t len,
                                           size_t cells,
                                           double speed,
                                           double horizon,
                                           size_t steps,
                                           const struct ConekitSolverConfig *cfg,
                                           struct ConekitResult **out);

/**
 * Number of time nodes (`steps + 1`), or 0 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t conekit_result_nodes(const struct ConekitResult *result);

/**
 * Values per node (`sizes * cells`), or 0 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t conekit_result_state_len(const struct ConekitResult *result);

/**
 * Picard sweeps used, or 0 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t conekit_result_iterations(const struct ConekitResult *result);

/**
 * Copies the state at `node` into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `result` must be a live handle and `buf` valid for `len` writes.
 */
enum ConekitStatus conekit_result_state(const struct ConekitResult *result,
                                        size_t node,
                                        double *buf,
                                        size_t len);

/**
 * # Safety
 * `result` must be null or a handle not yet freed.
 */
void conekit_result_free(struct ConekitResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONEKIT_H */
