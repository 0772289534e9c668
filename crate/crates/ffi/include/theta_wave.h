#ifndef THETA_WAVE_H
#define THETA_WAVE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum tw_status {
  TW_STATUS_OK = 0,
  TW_STATUS_NULL_POINTER = 1,
  TW_STATUS_INVALID_ARGUMENT = 2,
  TW_STATUS_NON_FINITE = 3,
  TW_STATUS_UNSUPPORTED = 4,
  TW_STATUS_BUFFER_TOO_SMALL = 5,
  TW_STATUS_OUT_OF_RANGE = 6,
  TW_STATUS_IO = 7,
  TW_STATUS_INTERNAL = 8,
  TW_STATUS_PANIC = 9,
} tw_status;

/**
 * Opaque field handle.
 */
typedef struct tw_field tw_field;

/**
 * Opaque grid handle.
 */
typedef struct tw_grid tw_grid;

/**
 * Opaque trajectory handle.
 */
typedef struct tw_trajectory tw_trajectory;

/**
 * Time-loop settings; obtain defaults from [`tw_sim_config_default`].
 */
typedef struct tw_sim_config {
  double theta;
  double t_end;
  double cfl;
  double dt_min;
  double dt_max;
  double slope_blowup_threshold;
  uintptr_t output_every;
} tw_sim_config;

/**
 * Blow-up summary; `detected` is 0 for completed runs and the other fields are then zero.
 */
typedef struct tw_blowup {
  int32_t detected;
  double t_detect;
  /**
   * -1 below, +1 above.
   */
  int32_t direction;
  /**
   * 0 slope threshold, 1 step-size underflow, 2 non-finite state.
   */
  int32_t cause;
  double max_slope;
  double min_slope;
  double t_lower_bracket;
} tw_blowup;

/**
 * Copy the last error message (NUL-terminated, truncated to fit) into `buf`.
 * Returns the full message length in bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
uintptr_t tw_last_error_message(char *buf, uintptr_t len);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum tw_status tw_grid_new(uintptr_t n, double length, double origin, struct tw_grid **out);

/**
 * # Safety
 * `grid` must be null or a handle from `tw_grid_new` not yet freed.
 */
void tw_grid_free(struct tw_grid *grid);

/**
 * Point count, or 0 for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle.
 */
uintptr_t tw_grid_n(const struct tw_grid *grid);

/**
 * # Safety
 * `grid` must be a live handle; `out` valid for `len` doubles.
 */
enum tw_status tw_grid_points(const struct tw_grid *grid, double *out, uintptr_t len);

/**
 * New field on `grid` from `len == n` samples.
 *
 * # Safety
 * `grid` must be a live handle, `values` valid for `len` doubles, `out` valid for writes.
 */
enum tw_status tw_field_new(const struct tw_grid *grid,
                            const double *values,
                            uintptr_t len,
                            struct tw_field **out);

/**
 * # Safety
 * `field` must be null or a live handle.
 */
void tw_field_free(struct tw_field *field);

/**
 * Sample count, or 0 for a null handle.
 *
 * # Safety
 * `field` must be null or a live handle.
 */
uintptr_t tw_field_len(const struct tw_field *field);

/**
 * # Safety
 * `field` must be a live handle; `out` valid for `len` doubles.
 */
enum tw_status tw_field_values(const struct tw_field *field, double *out, uintptr_t len);

/**
 * `m = u - u_xx`.
 *
 * # Safety
 * `u` must be a live handle; `out` valid for writes.
 */
enum tw_status tw_helmholtz_apply(const struct tw_field *u, struct tw_field **out);

/**
 * `u = (1 - d²/dx²)^{-1} m`.
 *
 * # Safety
 * `m` must be a live handle; `out` valid for writes.
 */
enum tw_status tw_helmholtz_solve(const struct tw_field *m, struct tw_field **out);

/**
 * Spectral first derivative.
 *
 * # Safety
 * `f` must be a live handle; `out` valid for writes.
 */
enum tw_status tw_deriv(const struct tw_field *f, struct tw_field **out);

/**
 * Semidiscrete time derivative `u_t` of the equation with parameter `theta`.
 *
 * # Safety
 * `u` must be a live handle; `out` valid for writes.
 */
enum tw_status tw_rhs(const struct tw_field *u, double theta_value, struct tw_field **out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum tw_status tw_sim_config_default(double theta_value, double t_end, struct tw_sim_config *out);

/**
 * Evolve `u0`; a detected blow-up is a successful call (inspect with `tw_trajectory_blowup`).
 *
 * # Safety
 * `u0` must be a live handle, `config` valid for reads, `out` valid for writes.
 */
enum tw_status tw_evolve(const struct tw_field *u0,
                         const struct tw_sim_config *config,
                         struct tw_trajectory **out);

/**
 * # Safety
 * `traj` must be null or a live handle.
 */
void tw_trajectory_free(struct tw_trajectory *traj);

/**
 * Number of recorded states, or 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
uintptr_t tw_trajectory_len(const struct tw_trajectory *traj);

/**
 * # Safety
 * `traj` must be a live handle; `out` valid for `len` doubles.
 */
enum tw_status tw_trajectory_times(const struct tw_trajectory *traj, double *out, uintptr_t len);

/**
 * Copy of recorded state `index`.
 *
 * # Safety
 * `traj` must be a live handle; `out` valid for writes.
 */
enum tw_status tw_trajectory_state(const struct tw_trajectory *traj,
                                   uintptr_t index,
                                   struct tw_field **out);

/**
 * # Safety
 * `traj` must be a live handle; `out` valid for writes.
 */
enum tw_status tw_trajectory_blowup(const struct tw_trajectory *traj, struct tw_blowup *out);

/**
 * Largest `max|u_x|` over all accepted steps.
 *
 * # Safety
 * `traj` must be a live handle; `out` valid for writes.
 */
enum tw_status tw_trajectory_peak_slope(const struct tw_trajectory *traj, double *out);

/**
 * Breaking-time bound for odd data about `x_star`, in the theorem's time
 * variable (`run_time` = 0) or in the solver's time (`run_time` != 0).
 *
 * # Safety
 * `u0` must be a live handle; `out` valid for writes.
 */
enum tw_status tw_blowup_bound(const struct tw_field *u0,
                               double x_star,
                               double theta_value,
                               int32_t run_time,
                               double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum tw_status tw_theta_to_b(double theta_value, double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum tw_status tw_b_to_theta(double b, double *out);

/**
 * Weak-form residuals of the peakon `c exp(-|x - theta c t|)` over the standard
 * test functions on `[0, t_end)`: the largest one in `max_residual`, and the
 * largest one for the wrong-speed impostor in `impostor_max`.
 *
 * # Safety
 * `max_residual` and `impostor_max` must be valid for writes.
 */
enum tw_status tw_peakon_residual(double c,
                                  double theta_value,
                                  double t_end,
                                  double tol,
                                  double *max_residual,
                                  double *impostor_max);

#endif  /* THETA_WAVE_H */
