#ifndef KW_H
#define KW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. The first five match the `kw` command-line exit codes.
 */
typedef enum KwStatus {
  KW_STATUS_OK = 0,
  KW_STATUS_HYPOTHESIS = 1,
  KW_STATUS_INVALID_INPUT = 2,
  KW_STATUS_NO_CONVERGENCE = 3,
  KW_STATUS_VERIFICATION = 4,
  KW_STATUS_NULL_POINTER = 5,
  KW_STATUS_PANIC = 6,
} KwStatus;

typedef struct KwField KwField;

typedef struct KwGrid KwGrid;

typedef struct KwProblem KwProblem;

typedef struct KwSolveInfo {
  bool converged;
  /**
   * Newton/monotone iterations or flow time steps.
   */
  size_t iterations;
  /**
   * `sup |residual|` of the returned field.
   */
  double residual;
} KwSolveInfo;

typedef struct KwBoundsInfo {
  bool passed;
  /**
   * Every solution satisfies `u >= lower_bound`.
   */
  double lower_bound;
  double min_u;
  /**
   * NaN when `min A <= 0` and the L2 bound does not apply.
   */
  double l2_bound;
  double l2_norm;
} KwBoundsInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next `kw_*` call on the same thread.
 */
const char *kw_last_error_message(void);

/**
 * # Safety
 * `points` and `periods` must point to `dim` readable elements.
 */
enum KwStatus kw_grid_new(size_t dim,
                          const size_t *points,
                          const double *periods,
                          struct KwGrid **out);

/**
 * # Safety
 * `grid` must be null or a handle from `kw_grid_new` not yet freed.
 */
void kw_grid_free(struct KwGrid *grid);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle.
 */
size_t kw_grid_node_count(const struct KwGrid *grid);

/**
 * Copies `len` row-major node values into a new field.
 *
 * # Safety
 * `grid` must be a live handle and `values` must point to `len` doubles.
 */
enum KwStatus kw_field_new(const struct KwGrid *grid,
                           const double *values,
                           size_t len,
                           struct KwField **out);

/**
 * # Safety
 * `field` must be null or a live handle.
 */
void kw_field_free(struct KwField *field);

/**
 * # Safety
 * `field` must be null or a live handle.
 */
size_t kw_field_len(const struct KwField *field);

/**
 * Copies the node values into `dest`, which must hold exactly the field length.
 *
 * # Safety
 * `field` must be a live handle and `dest` must point to `len` writable doubles.
 */
enum KwStatus kw_field_copy_values(const struct KwField *field, double *dest, size_t len);

/**
 * Builds problem data. `theta` holds one component field per axis; pass
 * null with `theta_len = 0` for θ ≡ 0.
 *
 * # Safety
 * All handles must be live and `theta` must point to `theta_len` handles.
 */
enum KwStatus kw_problem_new(const struct KwGrid *grid,
                             const struct KwField *s,
                             const struct KwField *a,
                             const struct KwField *b,
                             double alpha,
                             double beta,
                             const struct KwField *const *theta,
                             size_t theta_len,
                             struct KwProblem **out);

/**
 * # Safety
 * `problem` must be null or a live handle.
 */
void kw_problem_free(struct KwProblem *problem);

/**
 * Checks the hypotheses (`strict` additionally requires `A > 0`). Returns
 * `KW_STATUS_HYPOTHESIS` with the first failed condition as the message.
 *
 * # Safety
 * `problem` must be a live handle.
 */
enum KwStatus kw_problem_validate(const struct KwProblem *problem, bool strict);

/**
 * `Lu − S − A e^{αu} + B e^{−βu}` as a new field.
 *
 * # Safety
 * Handles must be live.
 */
enum KwStatus kw_residual(const struct KwProblem *problem,
                          const struct KwField *u,
                          struct KwField **out);

/**
 * Damped Newton from `u0` (null for zero). `info` may be null.
 *
 * # Safety
 * Handles must be live or null where allowed.
 */
enum KwStatus kw_solve_newton(const struct KwProblem *problem,
                              const struct KwField *u0,
                              double tol,
                              size_t max_iter,
                              struct KwField **out,
                              struct KwSolveInfo *info);

/**
 * Parabolic flow from `u0` (null for zero) with the default implicit-linear
 * scheme and automatic time step, until `sup|u_t| <= residual_tol`.
 *
 * # Safety
 * Handles must be live or null where allowed.
 */
enum KwStatus kw_solve_flow(const struct KwProblem *problem,
                            const struct KwField *u0,
                            double residual_tol,
                            double max_time,
                            struct KwField **out,
                            struct KwSolveInfo *info);

/**
 * Monotone iteration from the automatically constructed supersolution.
 *
 * # Safety
 * Handles must be live.
 */
enum KwStatus kw_solve_monotone(const struct KwProblem *problem,
                                double tol,
                                size_t max_iter,
                                struct KwField **out,
                                struct KwSolveInfo *info);

/**
 * Checks `u` against the a-priori lower and L2 bounds. Returns
 * `KW_STATUS_VERIFICATION` when a bound fails; `info` is filled either way.
 *
 * # Safety
 * Handles must be live; `info` may be null.
 */
enum KwStatus kw_verify_bounds(const struct KwProblem *problem,
                               const struct KwField *u,
                               struct KwBoundsInfo *info);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KW_H */
