#ifndef INVERTKIT_H
#define INVERTKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum InvkStatus {
  INVK_STATUS_OK = 0,
  INVK_STATUS_NULL_POINTER = 1,
  INVK_STATUS_INVALID_ARGUMENT = 2,
  INVK_STATUS_UNKNOWN_MAP = 3,
  INVK_STATUS_DIMENSION_MISMATCH = 4,
  /**
   * The map produced a non-finite value or a singular Jacobian.
   */
  INVK_STATUS_NUMERICAL = 5,
  INVK_STATUS_PRECONDITION = 6,
  INVK_STATUS_PANIC = 7,
} InvkStatus;

/**
 * Opaque map handle.
 */
typedef struct InvkMap InvkMap;

/**
 * Writes `n` values (the image, or the row-major Jacobian for `n×n`) to
 * `out`; a nonzero return marks the evaluation as failed.
 */
typedef int (*InvkCallback)(void *user_data, const double *x, double *out);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Wraps caller-supplied callbacks as a map. `name` may be null. The
 * callbacks must be thread-safe and stay valid until the map is freed;
 * failures they signal surface as `INVK_STATUS_NUMERICAL`.
 *
 * # Safety
 * `out_map` must be writable; `name`, if non-null, must be a NUL-terminated string.
 */
enum InvkStatus invk_map_new(const char *name,
                             size_t dim,
                             InvkCallback eval,
                             InvkCallback jacobian,
                             void *user_data,
                             struct InvkMap **out_map);

/**
 * Looks up a gallery map by spec, e.g. `"complex-exp"` or `"shifted-sine:2,1"`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out_map` writable.
 */
enum InvkStatus invk_map_from_spec(const char *spec, struct InvkMap **out_map);

/**
 * # Safety
 * `map` must come from this library and not be used afterwards. Null is ignored.
 */
void invk_map_free(struct InvkMap *map);

/**
 * Dimension of the map, or 0 for a null handle.
 *
 * # Safety
 * `map` must be null or a live handle.
 */
size_t invk_map_dim(const struct InvkMap *map);

/**
 * # Safety
 * `x` and `out` must hold `dim` doubles.
 */
enum InvkStatus invk_map_eval(const struct InvkMap *map, const double *x, double *out);

/**
 * Jacobian in row-major order.
 *
 * # Safety
 * `x` must hold `dim` doubles and `out` `dim·dim`.
 */
enum InvkStatus invk_map_jacobian(const struct InvkMap *map, const double *x, double *out);

/**
 * `F_y(x) = ½|f(x) − y|²`.
 *
 * # Safety
 * `x` and `y` must hold `dim` doubles; `out` must be writable.
 */
enum InvkStatus invk_value(const struct InvkMap *map,
                           const double *x,
                           const double *y,
                           double *out);

/**
 * `|df(x)ᵀ(f(x) − y)|`.
 *
 * # Safety
 * As [`invk_value`].
 */
enum InvkStatus invk_criticality(const struct InvkMap *map,
                                 const double *x,
                                 const double *y,
                                 double *out);

/**
 * Smallest singular value of the Jacobian at `x`.
 *
 * # Safety
 * `x` must hold `dim` doubles; `out` must be writable.
 */
enum InvkStatus invk_banach_constant(const struct InvkMap *map, const double *x, double *out);

/**
 * Solves `f(x) = y` with the zero weight, trying `n_starts` starts stored
 * back to back. On success `out_solution` receives the solution and
 * `*out_solved` is 1; otherwise `*out_solved` is 0 and `out_solution` is untouched.
 *
 * # Safety
 * `y` and `out_solution` hold `dim` doubles, `starts` holds `n_starts·dim`.
 */
enum InvkStatus invk_solve(const struct InvkMap *map,
                           const double *y,
                           const double *starts,
                           size_t n_starts,
                           double residual_tol,
                           double *out_solution,
                           int *out_solved);

/**
 * Runs the criteria chain and returns the report as JSON. `y` may be null
 * for the origin. Free the string with [`invk_string_free`].
 *
 * # Safety
 * `y`, if non-null, holds `dim` doubles; `out_json` must be writable.
 */
enum InvkStatus invk_check_json(const struct InvkMap *map,
                                double radius,
                                size_t samples,
                                uint64_t seed,
                                const double *y,
                                char **out_json);

/**
 * Looks for two preimages of `y` from the given starts and, when found,
 * runs the mountain-pass band between them; returns the verdict as JSON.
 *
 * # Safety
 * As [`invk_solve`]; `out_json` must be writable.
 */
enum InvkStatus invk_mpass_json(const struct InvkMap *map,
                                const double *y,
                                const double *starts,
                                size_t n_starts,
                                char **out_json);

/**
 * The gallery listing with ground truth, as JSON.
 *
 * # Safety
 * `out_json` must be writable.
 */
enum InvkStatus invk_gallery_json(char **out_json);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void invk_string_free(char *s);

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next library call on the same thread.
 */
const char *invk_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INVERTKIT_H */
