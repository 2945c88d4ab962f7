#ifndef DAMPWAVE_H
#define DAMPWAVE_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DwStatus {
  DW_STATUS_OK = 0,
  DW_STATUS_NULL_POINTER = 1,
  DW_STATUS_INVALID_ARGUMENT = 2,
  DW_STATUS_CONFIG = 3,
  DW_STATUS_UNRESOLVED = 4,
  DW_STATUS_NON_CONVERGENCE = 5,
  DW_STATUS_NUMERICAL = 6,
  DW_STATUS_IO = 7,
  /**
   * The run finished but one of its checks failed.
   */
  DW_STATUS_CHECK_FAILED = 8,
  DW_STATUS_PANIC = 9,
} DwStatus;

typedef enum DwAxisKind {
  DW_AXIS_KIND_PERIODIC = 0,
  DW_AXIS_KIND_TRUNCATED_BOX = 1,
} DwAxisKind;

typedef enum DwFamily {
  DW_FAMILY_STATIONARY = 0,
  DW_FAMILY_REDUCED = 1,
  DW_FAMILY_MODEL = 2,
  DW_FAMILY_RESCALED = 3,
} DwFamily;

/**
 * Damping coefficient handle.
 */
typedef struct DwDamping DwDamping;

/**
 * Spectral grid handle.
 */
typedef struct DwGrid DwGrid;

typedef struct DwOperatorParams {
  enum DwFamily family;
  double lambda;
  double omega;
  double mu;
  /**
   * Relative accuracy of the singular value; 0 picks the default.
   */
  double tolerance;
  uint64_t seed;
} DwOperatorParams;

typedef struct DwGccResult {
  bool satisfied;
  /**
   * Largest hit time when satisfied, otherwise 0.
   */
  double max_hit_time;
  /**
   * Sampled rays that never met the damped region.
   */
  size_t witnesses;
} DwGccResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *dw_last_error(void);

/**
 * `(sum_i (2 sin((x_i - c_i)/2))^2)^gamma` around `center[0..dims]`.
 *
 * # Safety
 * `center` must hold `dims` values; `out` must be writable.
 */
enum DwStatus dw_damping_periodic_power(double gamma,
                                        const double *center,
                                        size_t dims,
                                        struct DwDamping **out);

/**
 * `|x - c|^{2 gamma}` around `center[0..dims]`.
 *
 * # Safety
 * As [`dw_damping_periodic_power`].
 */
enum DwStatus dw_damping_radial_power(double gamma,
                                      const double *center,
                                      size_t dims,
                                      struct DwDamping **out);

/**
 * `level` where `|x_a - band_center| < half_width` for a listed axis,
 * plus `floor` everywhere.
 *
 * # Safety
 * `axes` must hold `axis_count` values; `out` must be writable.
 */
enum DwStatus dw_damping_strip(const size_t *axes,
                               size_t axis_count,
                               double band_center,
                               double half_width,
                               double level,
                               double floor,
                               struct DwDamping **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum DwStatus dw_damping_constant(double value, struct DwDamping **out);

/**
 * # Safety
 * `damping` must come from a `dw_damping_*` constructor and not be used
 * afterwards. Null is ignored.
 */
void dw_damping_free(struct DwDamping *damping);

/**
 * `b(x)` at `x[0..dims]`.
 *
 * # Safety
 * `damping` must be live, `x` must hold `dims` values, `out` writable.
 */
enum DwStatus dw_damping_eval(const struct DwDamping *damping,
                              const double *x,
                              size_t dims,
                              double *out);

/**
 * Grid with `interior_dims` interior axes followed by `torus_dims` torus
 * axes; `modes`, `lengths`, `kinds` hold one entry per axis.
 *
 * # Safety
 * The arrays must hold `interior_dims + torus_dims` entries; `out` must
 * be writable.
 */
enum DwStatus dw_grid_new(size_t interior_dims,
                          size_t torus_dims,
                          const size_t *modes,
                          const double *lengths,
                          const enum DwAxisKind *kinds,
                          struct DwGrid **out);

/**
 * # Safety
 * `grid` must come from [`dw_grid_new`] and not be used afterwards.
 */
void dw_grid_free(struct DwGrid *grid);

/**
 * Number of grid points, 0 for null.
 *
 * # Safety
 * `grid` must be live or null.
 */
size_t dw_grid_len(const struct DwGrid *grid);

/**
 * Smallest singular value of the operator described by `params` on `grid`.
 *
 * # Safety
 * Handles must be live; `params` and `sigma` must be valid pointers.
 */
enum DwStatus dw_sigma_min(const struct DwDamping *damping,
                           const struct DwGrid *grid,
                           const struct DwOperatorParams *params,
                           double *sigma);

/**
 * `f(lambda, omega)` for constants `c0`, `gamma`; NaN for invalid input.
 */
double dw_f_eval(double lambda, double omega, double c0, double gamma);

/**
 * `||P_k u_k|| / k^{1/(gamma+1)}` for the quasimode around the damping
 * centre, on its default grid with `torus_dims` torus axes.
 *
 * # Safety
 * `damping` must be live; `ratio` writable.
 */
enum DwStatus dw_quasimode_ratio(const struct DwDamping *damping,
                                 uint32_t k,
                                 size_t torus_dims,
                                 double *ratio);

/**
 * Ray-scan certificate of geometric control on the flat torus of
 * dimension `dims`; counts below 64 are rejected.
 *
 * # Safety
 * `damping` must be live; `result` writable.
 */
enum DwStatus dw_gcc_certify(const struct DwDamping *damping,
                             size_t dims,
                             size_t direction_count,
                             size_t base_count,
                             struct DwGccResult *result);

/**
 * Runs the experiment config at `path` (UTF-8), writing artifacts to its
 * output directory or to `output` when non-null. Returns
 * `DW_STATUS_CHECK_FAILED` when a gating check fails.
 *
 * # Safety
 * `path` must be a nul-terminated string; `output` null or one.
 */
enum DwStatus dw_run_config(const char *path, const char *output);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DAMPWAVE_H */
