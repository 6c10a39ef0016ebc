#ifndef HPSEM_H
#define HPSEM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
enum HpsemStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  HPSEM_STATUS_OK = 0,
  HPSEM_STATUS_NULL_POINTER = 1,
  HPSEM_STATUS_INVALID_UTF8 = 2,
  HPSEM_STATUS_CONFIG = 3,
  HPSEM_STATUS_UNKNOWN_PROBLEM = 4,
  HPSEM_STATUS_INVALID_ARGUMENT = 5,
  HPSEM_STATUS_MESH = 6,
  HPSEM_STATUS_BREAKDOWN = 7,
  HPSEM_STATUS_BUFFER_TOO_SMALL = 8,
  HPSEM_STATUS_OUT_OF_RANGE = 9,
  HPSEM_STATUS_PANIC = 10,
  HPSEM_STATUS_INTERNAL = 11,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum HpsemStatus HpsemStatus;
#else
typedef int32_t HpsemStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * Opaque solver handle.
 */
typedef struct HpsemSolver HpsemSolver;

/**
 * Outcome of one solve.
 */
typedef struct HpsemReport {
  /**
   * Sweep parameter of the row (degree, mesh size or hp degree).
   */
  double param;
  size_t degree;
  size_t layers;
  size_t elements;
  size_t dof;
  size_t iterations;
  /**
   * 0 converged, 1 iteration limit reached, 2 breakdown.
   */
  int32_t status;
  /**
   * Relative H¹ error in percent; NaN when unavailable.
   */
  double rel_error_percent;
  double functional_final;
  double wall_time;
} HpsemReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hpsem_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes). `needed`, when non-null, receives the full
 * length including the terminator.
 *
 * # Safety
 * `buf` must point to `len` writable bytes or be null with `len == 0`.
 */
HpsemStatus hpsem_last_error_message(char *buf, size_t len, size_t *needed);

/**
 * Creates a solver from TOML configuration text (same keys as the CLI
 * configuration files). The sweep keys may be omitted for single solves.
 *
 * # Safety
 * `config` must be a NUL-terminated string and `out` a valid pointer.
 */
HpsemStatus hpsem_solver_new(const char *config, struct HpsemSolver **out);

/**
 * Releases a solver. Null is ignored.
 *
 * # Safety
 * `solver` must come from [`hpsem_solver_new`] and not be used afterwards.
 */
void hpsem_solver_free(struct HpsemSolver *solver);

/**
 * Solves the configured problem at `degree` and `layers` (the configured
 * values when zero). The residual history of the solve is kept on the handle.
 *
 * # Safety
 * `solver` and `report` must be valid pointers.
 */
HpsemStatus hpsem_solver_solve(struct HpsemSolver *solver,
                               size_t degree,
                               size_t layers,
                               struct HpsemReport *report);

/**
 * Runs the configured sweep. Afterwards `hpsem_solver_row` returns each row.
 *
 * # Safety
 * `solver` and `n_rows` must be valid pointers.
 */
HpsemStatus hpsem_solver_run_study(struct HpsemSolver *solver, size_t *n_rows);

/**
 * Report of row `index` of the last solve or study.
 *
 * # Safety
 * `solver` and `report` must be valid pointers.
 */
HpsemStatus hpsem_solver_row(const struct HpsemSolver *solver,
                             size_t index,
                             struct HpsemReport *report);

/**
 * Copies the residual history `sqrt(<r_k, P r_k>)` of row `index` into
 * `buf`. `len_out` receives the history length; pass a null `buf` to query it.
 *
 * # Safety
 * `buf` must point to `cap` writable doubles or be null.
 */
HpsemStatus hpsem_solver_history(const struct HpsemSolver *solver,
                                 size_t index,
                                 double *buf,
                                 size_t cap,
                                 size_t *len_out);

/**
 * Spectral condition number of the preconditioned single-element form at degree `w`.
 *
 * # Safety
 * `kappa` must be a valid pointer.
 */
HpsemStatus hpsem_condition_number(size_t w, double *kappa);

/**
 * Gauss-Lobatto-Legendre rule of order `n`: writes `n + 1` nodes and weights.
 *
 * # Safety
 * `nodes` and `weights` must each point to `cap` writable doubles.
 */
HpsemStatus hpsem_gll_rule(size_t n, double *nodes, double *weights, size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HPSEM_H */
