#ifndef GEOSTRETCH_H
#define GEOSTRETCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GsObjective {
  GS_OBJECTIVE_TAN_MIN = 0,
  GS_OBJECTIVE_ORTH_MAX = 1,
  GS_OBJECTIVE_RATIO_MAX = 2,
} GsObjective;

typedef enum GsStatus {
  GS_STATUS_OK = 0,
  GS_STATUS_NULL_POINTER = 1,
  GS_STATUS_INVALID_ARGUMENT = 2,
  GS_STATUS_UNKNOWN_MODEL = 3,
  GS_STATUS_DOMAIN = 4,
  GS_STATUS_DEGENERATE = 5,
  GS_STATUS_CAPABILITY = 6,
  GS_STATUS_NUMERICAL = 7,
  GS_STATUS_NO_EXTREMUM = 8,
  GS_STATUS_PANIC = 9,
} GsStatus;

// Opaque model handle.
typedef struct GsModel GsModel;

// Result of [`gs_locate`].
typedef struct GsLocated {
  double coordinate;
  double theta_tan;
  double theta_orth;
} GsLocated;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a built-in model by id (`linear`, `davis-skodje`,
// `michaelis-menten`, `chiavazzo`, `constant`) with optional parameter
// overrides given as parallel arrays of names and values.
//
// # Safety
// `id` must be a NUL-terminated string; `names` and `values` must hold
// `n_params` entries (both may be null when `n_params` is 0); `out` must be
// writable.
enum GsStatus gs_model_new(const char *id,
                           const char *const *names,
                           const double *values,
                           size_t n_params,
                           struct GsModel **out);

// Releases a model. Null is accepted and ignored.
//
// # Safety
// `model` must come from [`gs_model_new`] and not have been freed.
void gs_model_free(struct GsModel *model);

// State-space dimension n, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t gs_model_dim(const struct GsModel *model);

// Metric and inverse metric at `(x, tau)`, each `(n+1)×(n+1)` row-major.
// `g_inv` may be null.
//
// # Safety
// `x` holds `n` values; `g` (and `g_inv` if non-null) hold `(n+1)^2`.
enum GsStatus gs_metric(const struct GsModel *model,
                        const double *x,
                        size_t n,
                        double tau,
                        double *g,
                        double *g_inv);

// Geodesic stretching rate of the extended-space vector `v` (length n+1).
//
// # Safety
// `x` holds `n` values, `v` holds `n+1`, `out` is writable.
enum GsStatus gs_geodesic_stretching(const struct GsModel *model,
                                     const double *x,
                                     size_t n,
                                     const double *v,
                                     double *out);

// Tangential and orthogonal rates at a state of a planar model, with the
// tangential subspace taken along the trajectory.
//
// # Safety
// `x` holds `n` values; `theta_tan` and `theta_orth` are writable.
enum GsStatus gs_theta_extrema(const struct GsModel *model,
                               const double *x,
                               size_t n,
                               double *theta_tan,
                               double *theta_orth);

// Flow-curvature determinant Ψ at `x`.
//
// # Safety
// `x` holds `n` values; `out` is writable.
enum GsStatus gs_psi(const struct GsModel *model, const double *x, size_t n, double *out);

// Locates the slow-manifold point on the line through `base` along
// coordinate `search_index`, restricted to `[lower, upper]`.
// `objective` is a `GsObjective` value; `grid` of 0 selects the library
// default.
//
// # Safety
// `base` holds `n` values; `out` is writable.
enum GsStatus gs_locate(const struct GsModel *model,
                        const double *base,
                        size_t n,
                        size_t search_index,
                        double lower,
                        double upper,
                        uint32_t objective,
                        size_t grid,
                        struct GsLocated *out);

// Message for the most recent failure on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *gs_last_error_message(void);

// Static name of a status code.
const char *gs_status_name(enum GsStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEOSTRETCH_H */
