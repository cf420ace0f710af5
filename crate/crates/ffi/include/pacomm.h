#ifndef PACOMM_H
#define PACOMM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum PacommStatus {
  PACOMM_STATUS_OK = 0,
  PACOMM_STATUS_NULL_POINTER = 1,
  PACOMM_STATUS_INVALID = 2,
  PACOMM_STATUS_NUMERIC = 3,
  PACOMM_STATUS_BUFFER_TOO_SMALL = 4,
  PACOMM_STATUS_PANIC = 5,
} PacommStatus;

typedef enum PacommFixedPointKind {
  PACOMM_FIXED_POINT_KIND_STABLE = 0,
  PACOMM_FIXED_POINT_KIND_UNSTABLE = 1,
  PACOMM_FIXED_POINT_KIND_TOUCHPOINT = 2,
  PACOMM_FIXED_POINT_KIND_BOUNDARY_STABLE = 3,
  PACOMM_FIXED_POINT_KIND_BOUNDARY_UNSTABLE = 4,
} PacommFixedPointKind;

typedef enum PacommStability {
  PACOMM_STABILITY_LINEARLY_STABLE = 0,
  PACOMM_STABILITY_LINEARLY_UNSTABLE = 1,
  PACOMM_STABILITY_MARGINAL = 2,
} PacommStability;

typedef enum PacommColors {
  /**
   * Fair coin per seed vertex.
   */
  PACOMM_COLORS_RANDOM = 0,
  /**
   * One red and one blue seed vertex per community.
   */
  PACOMM_COLORS_BALANCED = 1,
} PacommColors;

typedef struct PacommRule PacommRule;

typedef struct PacommSimulation PacommSimulation;

typedef struct PacommStructure PacommStructure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pacomm_version(void);

/**
 * Message of the most recent failed call on this thread, or NULL. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *pacomm_last_error_message(void);

/**
 * Parses a rule such as `"majority:m=3"` or `"explicit:p=[0,0.2,0.8,1]"`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PacommStatus pacomm_rule_parse(const char *spec, struct PacommRule **out);

/**
 * Rule from the probabilities `p[0..len]`, so `m = len - 1`.
 *
 * # Safety
 * `p` must point to `len` doubles and `out` must be valid.
 */
enum PacommStatus pacomm_rule_explicit(const double *p, size_t len, struct PacommRule **out);

/**
 * # Safety
 * `rule` must come from this library and not be used afterwards. NULL is a no-op.
 */
void pacomm_rule_free(struct PacommRule *rule);

/**
 * # Safety
 * Pointers must be valid.
 */
enum PacommStatus pacomm_rule_m(const struct PacommRule *rule, size_t *m_out);

/**
 * `R(z)` for `z` in `[0, 1]`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PacommStatus pacomm_rule_eval(const struct PacommRule *rule, double z, double *value_out);

/**
 * # Safety
 * Pointers must be valid.
 */
enum PacommStatus pacomm_rule_is_linear(const struct PacommRule *rule, bool *linear_out);

/**
 * Fixed points of `R` in `[0, 1]`, ascending, with their kinds. Linear rules
 * fix every point and return `Invalid`.
 *
 * # Safety
 * `z_out` and `kind_out` must hold `cap` elements (either may be NULL when
 * `cap` is 0); `count_out` must be valid.
 */
enum PacommStatus pacomm_rule_fixed_points(const struct PacommRule *rule,
                                           double *z_out,
                                           enum PacommFixedPointKind *kind_out,
                                           size_t cap,
                                           size_t *count_out);

/**
 * Structure from a row-major `n x n` attractiveness matrix and community
 * measure `mu` (NULL for uniform).
 *
 * # Safety
 * `a` must hold `n * n` doubles, `mu` NULL or `n` doubles, `out` valid.
 */
enum PacommStatus pacomm_structure_new(const double *a,
                                       const double *mu,
                                       size_t n,
                                       struct PacommStructure **out);

/**
 * # Safety
 * `structure` must come from this library and not be used afterwards. NULL is a no-op.
 */
void pacomm_structure_free(struct PacommStructure *structure);

/**
 * # Safety
 * Pointers must be valid.
 */
enum PacommStatus pacomm_structure_n(const struct PacommStructure *structure, size_t *n_out);

/**
 * Limiting edge-end measure `nu`, one value per community.
 *
 * # Safety
 * `nu_out` must hold `cap` doubles; `len_out` may be NULL.
 */
enum PacommStatus pacomm_structure_solve_nu(const struct PacommStructure *structure,
                                            double *nu_out,
                                            size_t cap,
                                            size_t *len_out);

/**
 * Stationary points of the restricted mean-field flow found by multistart
 * Newton on a `grid^n` lattice (`grid = 0` picks a default). Point `k` is
 * `z_out[k*n .. (k+1)*n]`; `cap` counts points, not doubles.
 *
 * # Safety
 * `z_out` must hold `cap * n` doubles, `max_re_out` and `stability_out`
 * `cap` elements each (NULL allowed when `cap` is 0); `count_out` valid.
 */
enum PacommStatus pacomm_stationary_points(const struct PacommRule *rule,
                                           const struct PacommStructure *structure,
                                           size_t grid,
                                           double *z_out,
                                           double *max_re_out,
                                           enum PacommStability *stability_out,
                                           size_t cap,
                                           size_t *count_out);

/**
 * New simulation from copies of `rule` and `structure`, starting from the
 * default initial graph.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PacommStatus pacomm_simulation_new(const struct PacommRule *rule,
                                        const struct PacommStructure *structure,
                                        uint64_t seed,
                                        enum PacommColors colors,
                                        struct PacommSimulation **out);

/**
 * # Safety
 * `sim` must come from this library and not be used afterwards. NULL is a no-op.
 */
void pacomm_simulation_free(struct PacommSimulation *sim);

/**
 * Adds `steps` newcomers.
 *
 * # Safety
 * `sim` must be valid.
 */
enum PacommStatus pacomm_simulation_step(struct PacommSimulation *sim, uint64_t steps);

/**
 * Current time `n` (initial graph size plus newcomers).
 *
 * # Safety
 * Pointers must be valid.
 */
enum PacommStatus pacomm_simulation_n(const struct PacommSimulation *sim, uint64_t *n_out);

/**
 * Red fraction of edge ends per community, `Z_i`.
 *
 * # Safety
 * `z_out` must hold `cap` doubles; `len_out` may be NULL.
 */
enum PacommStatus pacomm_simulation_z(const struct PacommSimulation *sim,
                                      double *z_out,
                                      size_t cap,
                                      size_t *len_out);

/**
 * Share of all edge ends held by each community, `Y_i`.
 *
 * # Safety
 * `y_out` must hold `cap` doubles; `len_out` may be NULL.
 */
enum PacommStatus pacomm_simulation_y(const struct PacommSimulation *sim,
                                      double *y_out,
                                      size_t cap,
                                      size_t *len_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PACOMM_H */
