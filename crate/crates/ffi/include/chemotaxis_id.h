#ifndef CHEMOTAXIS_ID_H
#define CHEMOTAXIS_ID_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. The nonzero values match the command-line exit codes
 * where they overlap.
 */
typedef enum CidStatus {
  CID_STATUS_OK = 0,
  CID_STATUS_NULL_POINTER = 1,
  CID_STATUS_CONFIG = 2,
  CID_STATUS_SOLVER = 3,
  CID_STATUS_STAGNATION = 4,
  CID_STATUS_OUT_OF_RANGE = 5,
  CID_STATUS_PANIC = 6,
} CidStatus;

/**
 * Opaque piecewise-linear sensitivity.
 */
typedef struct CidSensitivity CidSensitivity;

/**
 * Opaque forward solution.
 */
typedef struct CidTrajectory CidTrajectory;

/**
 * Coefficients of the model.
 */
typedef struct CidParams {
  double m;
  double d;
  double b;
  double h;
  double mu;
} CidParams;

/**
 * Space-time grid.
 */
typedef struct CidGrid {
  double x_left;
  double x_right;
  size_t n_nodes;
  double t_final;
  size_t n_steps;
} CidGrid;

/**
 * Invariant diagnostics of a forward solution.
 */
typedef struct CidDiagnostics {
  double mass_drift;
  double min_u;
  double min_c;
  /**
   * Smallest ratio of min c to its exponential lower bound.
   */
  double c_bound_ratio;
} CidDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *cid_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cid_version(void);

/**
 * The limb-bud parameter set (M = 0.25, D = 1, h = 1, b = mu = 50).
 */
struct CidParams cid_params_myerscough(void);

/**
 * Sensitivity with `n` coefficients on uniform knots of `[c_min, c_max]`.
 *
 * # Safety
 * `coeffs` must point to `n` doubles and `out` to writable storage.
 */
enum CidStatus cid_sensitivity_new(double c_min,
                                   double c_max,
                                   const double *coeffs,
                                   size_t n,
                                   struct CidSensitivity **out);

/**
 * # Safety
 * `a` must be a live handle and `out` writable.
 */
enum CidStatus cid_sensitivity_eval(const struct CidSensitivity *a, double c, double *out);

/**
 * Number of coefficients, or 0 for a null handle.
 *
 * # Safety
 * `a` must be null or a live handle.
 */
size_t cid_sensitivity_n_basis(const struct CidSensitivity *a);

/**
 * Copy the coefficients into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `a` must be a live handle and `buf` valid for `len` writes.
 */
enum CidStatus cid_sensitivity_coeffs(const struct CidSensitivity *a, double *buf, size_t len);

/**
 * Read a sensitivity CSV written by the library.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum CidStatus cid_sensitivity_read_csv(const char *path, struct CidSensitivity **out);

/**
 * # Safety
 * `a` must be null or a handle not yet freed.
 */
void cid_sensitivity_free(struct CidSensitivity *a);

/**
 * Solve the forward problem. `u0` and `c0` hold `grid.n_nodes` values;
 * `substeps` is the minimum number of internal steps per grid step.
 *
 * # Safety
 * All pointers must be valid; `out` receives a new handle on success.
 */
enum CidStatus cid_solve_forward(const struct CidParams *params,
                                 const struct CidGrid *grid,
                                 const double *u0,
                                 const double *c0,
                                 const struct CidSensitivity *a,
                                 size_t substeps,
                                 struct CidTrajectory **out);

/**
 * Number of stored frames (n_steps + 1), or 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t cid_trajectory_n_frames(const struct CidTrajectory *t);

/**
 * Nodes per frame, or 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t cid_trajectory_n_nodes(const struct CidTrajectory *t);

/**
 * Copy frame `j` into `u` and `c`, each holding `len` doubles. Either
 * output may be null to skip it.
 *
 * # Safety
 * `t` must be a live handle; non-null buffers must be valid for `len` writes.
 */
enum CidStatus cid_trajectory_frame(const struct CidTrajectory *t,
                                    size_t j,
                                    double *u,
                                    double *c,
                                    size_t len);

/**
 * # Safety
 * `t` must be a live handle and `out` writable.
 */
enum CidStatus cid_trajectory_diagnostics(const struct CidTrajectory *t,
                                          struct CidDiagnostics *out);

/**
 * Write the trajectory as `t,x,u,c` CSV.
 *
 * # Safety
 * `t` must be a live handle and `path` a NUL-terminated string.
 */
enum CidStatus cid_trajectory_write_csv(const struct CidTrajectory *t, const char *path);

/**
 * # Safety
 * `t` must be null or a handle not yet freed.
 */
void cid_trajectory_free(struct CidTrajectory *t);

/**
 * Run one of the command-line commands (`forward`, `make-data`, `invert`,
 * `lcurve`, `rates`) from a TOML config file, writing into `out_dir`.
 * `config_path` may be null to use only the `myerscough` preset.
 *
 * # Safety
 * String arguments must be null or NUL-terminated.
 */
enum CidStatus cid_run_command(const char *command, const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHEMOTAXIS_ID_H */
