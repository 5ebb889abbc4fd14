#ifndef RIESZCERT_H
#define RIESZCERT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RcStatus {
  RC_STATUS_OK = 0,
  // Null pointer, too small buffer or malformed string.
  RC_STATUS_INVALID_ARGUMENT = 1,
  // Parameters outside the domain of the operation.
  RC_STATUS_DOMAIN = 2,
  // A numerical stage failed (quadrature, underflow, realization).
  RC_STATUS_NUMERIC = 3,
  RC_STATUS_IO = 4,
  RC_STATUS_PANIC = 5,
} RcStatus;

typedef struct RcGrid RcGrid;

typedef struct RcParams RcParams;

typedef struct RcTree RcTree;

// Constants derived from `(p, tau)`; `k_cone` is NaN at `p = 2`.
typedef struct RcConstants {
  double p;
  double tau;
  double p_star_minus_1;
  double k_lam;
  double k_cone;
  double c_b;
  double alpha_p;
  double norm_target;
  bool in_t;
} RcConstants;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message (NUL-terminated, truncated to `len`) and
// returns its full length in bytes, excluding the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t rc_last_error_message(char *buf, size_t len);

// # Safety
// `out` must be a valid pointer.
enum RcStatus rc_params_new(double p, double tau, struct RcParams **out);

// # Safety
// `h` must come from [`rc_params_new`] and not be used afterwards.
void rc_params_free(struct RcParams *h);

// # Safety
// `h` and `out` must be valid pointers.
enum RcStatus rc_params_constants(const struct RcParams *h, struct RcConstants *out);

// Majorant `U(x1, x2)`; NaN for a null handle.
//
// # Safety
// `h` must be null or valid.
double rc_eval_majorant(const struct RcParams *h, double x1, double x2);

// Obstacle `v(x1, x2)`; NaN for a null handle.
//
// # Safety
// `h` must be null or valid.
double rc_eval_obstacle(const struct RcParams *h, double x1, double x2);

// Closed-form ratio of the continuous laminate with parameter `n`.
//
// # Safety
// `h` and `out` must be valid pointers.
enum RcStatus rc_laminate_ratio(const struct RcParams *h, double n, double *out);

// The three-leaf example prelaminate.
//
// # Safety
// `out` must be a valid pointer.
enum RcStatus rc_tree_example(struct RcTree **out);

// Staircase prelaminate for the continuous laminate (`with_nu = false`) or
// for the composed measure with mean zero (`with_nu = true`).
//
// # Safety
// `h` and `out` must be valid pointers.
enum RcStatus rc_tree_staircase(const struct RcParams *h,
                                double n,
                                size_t steps,
                                bool with_nu,
                                struct RcTree **out);

// # Safety
// `h` must come from an `rc_tree_*` constructor and not be used afterwards.
void rc_tree_free(struct RcTree *h);

// Depth of the tree; zero for a null handle.
//
// # Safety
// `h` must be null or valid.
size_t rc_tree_depth(const struct RcTree *h);

// Writes `(weight, a11, a22, a12)` for each leaf into `buf` (capacity
// `cap` doubles) and the number of leaves into `count`. With a null or too
// small buffer only `count` is set and `InvalidArgument` is returned.
//
// # Safety
// `h` and `count` must be valid; `buf` must be null or hold `cap` doubles.
enum RcStatus rc_tree_leaves(const struct RcTree *h, double *buf, size_t cap, size_t *count);

// Realizes the tree on an `n x n` grid over `[-1, 1]^2`. `delta <= 0`
// disables the `C^1` budget; `truncate` cuts the tree to what fits.
//
// # Safety
// `tree` and `out` must be valid pointers.
enum RcStatus rc_realize(const struct RcTree *tree,
                         size_t n,
                         double layer_fraction,
                         double delta,
                         bool truncate,
                         struct RcGrid **out);

// # Safety
// `h` must come from [`rc_realize`] and not be used afterwards.
void rc_grid_free(struct RcGrid *h);

// Side length of the grid; zero for a null handle.
//
// # Safety
// `h` must be null or valid.
size_t rc_grid_size(const struct RcGrid *h);

// Copies the `n * n` row-major samples into `buf`.
//
// # Safety
// `h` must be valid; `buf` must be null or hold `cap` doubles.
enum RcStatus rc_grid_values(const struct RcGrid *h, double *buf, size_t cap);

// `∫φ1 / ∫φ2` over the grid Hessian of the field.
//
// # Safety
// All pointers must be valid.
enum RcStatus rc_grid_pushforward_ratio(const struct RcGrid *h,
                                        const struct RcParams *params,
                                        double *out);

// Writes the field in the `GRID2D` format to `path`.
//
// # Safety
// `h` must be valid and `path` a NUL-terminated string.
enum RcStatus rc_grid_write(const struct RcGrid *h, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIESZCERT_H */
