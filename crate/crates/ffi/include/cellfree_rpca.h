#ifndef CELLFREE_RPCA_H
#define CELLFREE_RPCA_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CfStatus {
  CF_STATUS_OK = 0,
  CF_STATUS_NULL_POINTER = 1,
  CF_STATUS_INVALID_ARGUMENT = 2,
  CF_STATUS_CONFIG = 3,
  CF_STATUS_IO = 4,
  CF_STATUS_NON_FINITE = 5,
  CF_STATUS_BUFFER_TOO_SMALL = 6,
  CF_STATUS_NO_DATA = 7,
  CF_STATUS_PANIC = 8,
} CfStatus;

typedef enum CfKind {
  CF_KIND_IDEAL = 0,
  CF_KIND_SP = 1,
  CF_KIND_PP = 2,
  CF_KIND_PM = 3,
} CfKind;

typedef enum CfScheme {
  CF_SCHEME_PROXIMAL_GRADIENT = 0,
  CF_SCHEME_ADMM = 1,
} CfScheme;

/**
 * Opaque experiment configuration.
 */
typedef struct CfConfig CfConfig;

/**
 * Opaque results of one experiment run.
 */
typedef struct CfResults CfResults;

/**
 * Solver settings for [`cf_outlier_pursuit`]; start from [`cf_solver_params_default`].
 */
typedef struct CfSolverParams {
  enum CfScheme scheme;
  size_t max_iter;
  double tol;
} CfSolverParams;

/**
 * Message of the last failed call on this thread, or null.
 *
 * The pointer stays valid until the next `cf_*` call on the same thread.
 */
const char *cf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cf_version(void);

/**
 * A configuration holding the default parameters.
 */
struct CfConfig *cf_config_default(void);

/**
 * Loads and validates a TOML (or `.json`) configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum CfStatus cf_config_load(const char *path, struct CfConfig **out);

/**
 * Sets one field from a TOML literal, e.g. `("N", "29")`, `("kinds", "[\"ideal\"]")`
 * or `("solver.max_iter", "200")`. The configuration is unchanged on failure.
 *
 * # Safety
 * `cfg` must come from this library; `key` and `value` must be NUL-terminated.
 */
enum CfStatus cf_config_set(struct CfConfig *cfg, const char *key, const char *value);

/**
 * Writes the resolved configuration as TOML into `buf`.
 *
 * `out_len` receives the text length without the terminator. When `cap` is
 * not larger than that, nothing is written and `CF_STATUS_BUFFER_TOO_SMALL`
 * is returned, so a null `buf` with `cap = 0` queries the size.
 *
 * # Safety
 * `cfg` must come from this library and `buf` must hold `cap` bytes.
 */
enum CfStatus cf_config_to_toml(const struct CfConfig *cfg, char *buf, size_t cap, size_t *out_len);

/**
 * # Safety
 * `cfg` must come from this library or be null; it must not be used afterwards.
 */
void cf_config_free(struct CfConfig *cfg);

/**
 * Runs the full experiment described by `cfg`.
 *
 * # Safety
 * `cfg` must come from this library and `out` must be writable.
 */
enum CfStatus cf_run(const struct CfConfig *cfg, struct CfResults **out);

/**
 * # Safety
 * `res` must come from this library or be null; it must not be used afterwards.
 */
void cf_results_free(struct CfResults *res);

/**
 * Copies the per-UE spectral efficiencies of `kind` (served UEs, layout order).
 *
 * `out_len` receives the record count; `CF_STATUS_BUFFER_TOO_SMALL` is
 * returned without copying when `cap` is smaller.
 *
 * # Safety
 * `res` must come from this library and `buf` must hold `cap` doubles.
 */
enum CfStatus cf_results_se(const struct CfResults *res,
                            enum CfKind kind,
                            double *buf,
                            size_t cap,
                            size_t *out_len);

/**
 * Median spectral efficiency of `kind`; `CF_STATUS_NO_DATA` when the kind was not simulated.
 *
 * # Safety
 * `res` must come from this library and `out` must be writable.
 */
enum CfStatus cf_results_median_se(const struct CfResults *res, enum CfKind kind, double *out);

/**
 * Mean power efficiency over all edges, of the DFT-projected estimates when
 * `projected` is true and of the raw ones otherwise.
 *
 * # Safety
 * `res` must come from this library and `out` must be writable.
 */
enum CfStatus cf_results_mean_pe(const struct CfResults *res, bool projected, double *out);

/**
 * Number of UEs left without any serving RU, summed over layouts.
 *
 * # Safety
 * `res` must come from this library and `out` must be writable.
 */
enum CfStatus cf_results_unserved(const struct CfResults *res, size_t *out);

/**
 * Writes the CSV, JSON and TOML result files into `dir`.
 *
 * # Safety
 * `res` must come from this library and `dir` must be NUL-terminated.
 */
enum CfStatus cf_results_write(const struct CfResults *res, const char *dir);

struct CfSolverParams cf_solver_params_default(void);

/**
 * Solves the outlier-pursuit program on a `rows x cols` matrix `Y = H + E`.
 *
 * Inputs and outputs are column-major arrays of `rows * cols` doubles.
 * `params` may be null for the defaults; `out_iterations` and
 * `out_converged` may be null.
 *
 * # Safety
 * All non-null pointers must be valid for `rows * cols` elements.
 */
enum CfStatus cf_outlier_pursuit(const double *y_re,
                                 const double *y_im,
                                 size_t rows,
                                 size_t cols,
                                 double lambda,
                                 const struct CfSolverParams *params,
                                 double *h_re,
                                 double *h_im,
                                 double *e_re,
                                 double *e_im,
                                 size_t *out_iterations,
                                 bool *out_converged);

/**
 * Power efficiency of the DFT-column estimate `estimate` against the true
 * angular support `support`, both index sets into the `m`-point DFT grid.
 *
 * # Safety
 * `support` and `estimate` must hold `support_len` and `estimate_len` indices.
 */
enum CfStatus cf_power_efficiency(size_t m,
                                  const size_t *support,
                                  size_t support_len,
                                  const size_t *estimate,
                                  size_t estimate_len,
                                  double *out);

/**
 * Writes square `t` (1-based, `1 <= t < n`) of the order-`n` family into
 * `out` as `n * n` row-major symbols in `1..=n`.
 *
 * # Safety
 * `out` must hold `cap` elements.
 */
enum CfStatus cf_mols_square(size_t n, size_t t, uint32_t *out, size_t cap);

#endif  /* CELLFREE_RPCA_H */
