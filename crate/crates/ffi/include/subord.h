#ifndef SUBORD_H
#define SUBORD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SubordStatus {
  SUBORD_STATUS_OK = 0,
  SUBORD_STATUS_INPUT = 1,
  SUBORD_STATUS_DOMAIN = 2,
  SUBORD_STATUS_NUMERICAL_INTEGRITY = 3,
  SUBORD_STATUS_CAPABILITY = 4,
  SUBORD_STATUS_DEGENERATE = 5,
  SUBORD_STATUS_NEAR_SINGULAR = 6,
  SUBORD_STATUS_INCOMPATIBLE = 7,
  SUBORD_STATUS_NON_CONVERGENCE = 8,
  SUBORD_STATUS_SYMMETRY_INTEGRITY = 9,
  SUBORD_STATUS_ABORTED_RUN = 10,
  SUBORD_STATUS_CONFIG = 11,
  SUBORD_STATUS_IO = 12,
  SUBORD_STATUS_NULL_POINTER = 13,
  SUBORD_STATUS_INVALID_UTF8 = 14,
  SUBORD_STATUS_PANIC = 15,
} SubordStatus;

typedef enum SubordScheme {
  SUBORD_SCHEME_IMPLICIT_EULER = 0,
  SUBORD_SCHEME_CRANK_NICOLSON = 1,
} SubordScheme;

/**
 * Complex samples on a periodic grid.
 */
typedef struct SubordGridFn SubordGridFn;

/**
 * A constructed symbol `p(x, xi)`.
 */
typedef struct SubordSymbol SubordSymbol;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *subord_last_error(void);

/**
 * Library version as a static string.
 */
const char *subord_version(void);

/**
 * Build the `[symbol]` of a TOML experiment configuration.
 *
 * # Safety
 * `config` must be a nul-terminated string; `out` must be writable.
 */
enum SubordStatus subord_symbol_from_config(const char *config, struct SubordSymbol **out);

/**
 * # Safety
 * `symbol` must come from this library or be null.
 */
void subord_symbol_free(struct SubordSymbol *symbol);

/**
 * Spatial dimension of the symbol.
 *
 * # Safety
 * `symbol` must be a live handle; `out` must be writable.
 */
enum SubordStatus subord_symbol_dim(const struct SubordSymbol *symbol, size_t *out);

/**
 * `p(x, xi)` with `x` and `xi` of length `dim`.
 *
 * # Safety
 * `x` and `xi` must point to `dim` doubles; `out` must be writable.
 */
enum SubordStatus subord_symbol_eval(const struct SubordSymbol *symbol,
                                     const double *x,
                                     const double *xi,
                                     size_t dim,
                                     double *out);

/**
 * Samples on a `dim`-dimensional grid with `points` per axis and period
 * `period`, in row-major order; `im` may be null for real data.
 *
 * # Safety
 * `re` (and `im` if non-null) must point to `points^dim` doubles.
 */
enum SubordStatus subord_gridfn_new(size_t dim,
                                    size_t points,
                                    double period,
                                    const double *re,
                                    const double *im,
                                    struct SubordGridFn **out);

/**
 * # Safety
 * `u` must come from this library or be null.
 */
void subord_gridfn_free(struct SubordGridFn *u);

/**
 * Number of samples.
 *
 * # Safety
 * `u` must be a live handle; `out` must be writable.
 */
enum SubordStatus subord_gridfn_len(const struct SubordGridFn *u, size_t *out);

/**
 * Copy the samples out; `len` must equal the sample count. `im` may be
 * null.
 *
 * # Safety
 * `re` (and `im` if non-null) must have room for `len` doubles.
 */
enum SubordStatus subord_gridfn_values(const struct SubordGridFn *u,
                                       double *re,
                                       double *im,
                                       size_t len);

/**
 * `p(x, D) u`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum SubordStatus subord_apply(const struct SubordSymbol *symbol,
                               const struct SubordGridFn *u,
                               struct SubordGridFn **out);

/**
 * Solve `(p(x, D) + lambda) u = f`; `max_iter = 0` selects the default.
 * `iterations` and `residual` may be null.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum SubordStatus subord_resolvent_solve(const struct SubordSymbol *symbol,
                                         double lambda,
                                         const struct SubordGridFn *f,
                                         double tol,
                                         size_t max_iter,
                                         struct SubordGridFn **out,
                                         size_t *iterations,
                                         double *residual);

/**
 * State after `steps` steps of `u' = -p(x, D) u` from `u0`; `scheme` is
 * a `SubordScheme` value.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum SubordStatus subord_evolve(const struct SubordSymbol *symbol,
                                const struct SubordGridFn *u0,
                                double dt,
                                size_t steps,
                                int32_t scheme,
                                struct SubordGridFn **out);

/**
 * Run `task` (a subcommand name) on a TOML configuration, writing
 * artifacts under `out_dir` (null keeps the configured directory).
 * `pass` receives 1 when every verdict passed, 0 otherwise.
 *
 * # Safety
 * Strings must be nul-terminated; `pass` must be writable.
 */
enum SubordStatus subord_run_experiment(const char *config,
                                        const char *task,
                                        const char *out_dir,
                                        int32_t *pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBORD_H */
