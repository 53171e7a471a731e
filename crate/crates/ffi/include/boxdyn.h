#ifndef BOXDYN_H
#define BOXDYN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum BoxdynStatus {
  BOXDYN_STATUS_OK = 0,
  // A required pointer was null or a string was not UTF-8.
  BOXDYN_STATUS_INVALID_ARGUMENT = 1,
  // Configuration or parameter error.
  BOXDYN_STATUS_CONFIG = 2,
  // Engine failure: convergence, tolerance, node, domain.
  BOXDYN_STATUS_ENGINE = 3,
  BOXDYN_STATUS_IO = 4,
  // Internal panic; the handle arguments should be considered unusable.
  BOXDYN_STATUS_PANIC = 5,
} BoxdynStatus;

// Opaque sampled wavefunction on a physical grid.
typedef struct BoxdynField BoxdynField;

// Opaque wall law.
typedef struct BoxdynTrajectory BoxdynTrajectory;

// Mass, ħ and the speed of light. A null pointer means atomic units.
typedef struct BoxdynParams {
  double mass;
  double hbar;
  double c;
} BoxdynParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *boxdyn_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *boxdyn_version(void);

// θ₂(z, κ), choosing the faster series.
//
// # Safety
// `out_re` and `out_im` must be valid for writes.
enum BoxdynStatus boxdyn_theta2(double z_re,
                                double z_im,
                                double kappa_re,
                                double kappa_im,
                                double *out_re,
                                double *out_im);

// θ₂(z, κ) through the Jacobi transformation.
//
// # Safety
// `out_re` and `out_im` must be valid for writes.
enum BoxdynStatus boxdyn_jacobi_transform_theta2(double z_re,
                                                 double z_im,
                                                 double kappa_re,
                                                 double kappa_im,
                                                 double *out_re,
                                                 double *out_im);

// θ₄(z, κ).
//
// # Safety
// `out_re` and `out_im` must be valid for writes.
enum BoxdynStatus boxdyn_theta4(double z_re,
                                double z_im,
                                double kappa_re,
                                double kappa_im,
                                double *out_re,
                                double *out_im);

// Walls fixed at width `l0`.
//
// # Safety
// `out` must be valid for writes.
enum BoxdynStatus boxdyn_trajectory_static(double l0, struct BoxdynTrajectory **out);

// `L(t) = l0 + q t`.
//
// # Safety
// `out` must be valid for writes.
enum BoxdynStatus boxdyn_trajectory_linear(double l0, double q, struct BoxdynTrajectory **out);

// `L(t) = l0 + q t (1 − e^{−βt})`.
//
// # Safety
// `out` must be valid for writes.
enum BoxdynStatus boxdyn_trajectory_smooth_turn_on(double l0,
                                                   double q,
                                                   double beta,
                                                   struct BoxdynTrajectory **out);

// Expands at speed `q` until `period / 2`, then contracts.
//
// # Safety
// `out` must be valid for writes.
enum BoxdynStatus boxdyn_trajectory_piecewise_reversal(double l0,
                                                       double q,
                                                       double period,
                                                       struct BoxdynTrajectory **out);

// Box width at time `t`.
//
// # Safety
// `traj` must come from a trajectory constructor; `out` must be valid for writes.
enum BoxdynStatus boxdyn_trajectory_length(const struct BoxdynTrajectory *traj,
                                           double t,
                                           double *out);

// Releases a trajectory; null is ignored.
//
// # Safety
// `traj` must be null or come from a trajectory constructor, and must not
// be used afterwards.
void boxdyn_trajectory_free(struct BoxdynTrajectory *traj);

// Closed-form current of even moving-wall basis state `n` at `(x, t)`.
//
// # Safety
// `traj` must come from a trajectory constructor; `out` must be valid for writes.
enum BoxdynStatus boxdyn_current_basis_closed(const struct BoxdynTrajectory *traj,
                                              size_t n,
                                              double x,
                                              double t,
                                              double *out);

// Even moving-wall basis state `n` at time `t` on `n_points` samples
// spanning the box.
//
// # Safety
// `traj` must come from a trajectory constructor; `params` may be null;
// `out` must be valid for writes.
enum BoxdynStatus boxdyn_field_basis_physical(const struct BoxdynTrajectory *traj,
                                              const struct BoxdynParams *params,
                                              size_t n,
                                              double t,
                                              size_t n_points,
                                              struct BoxdynField **out);

// Closed-form evolution of the centred Gaussian of width `d`.
//
// # Safety
// As [`boxdyn_field_basis_physical`].
enum BoxdynStatus boxdyn_field_gaussian(const struct BoxdynTrajectory *traj,
                                        const struct BoxdynParams *params,
                                        double d,
                                        double t,
                                        size_t n_points,
                                        struct BoxdynField **out);

// Number of samples in `field`.
//
// # Safety
// `field` must come from a field constructor; `out` must be valid for writes.
enum BoxdynStatus boxdyn_field_len(const struct BoxdynField *field, size_t *out);

// Copies positions and samples into caller buffers of length `len`, which
// must equal the field length. Any of the three buffers may be null.
//
// # Safety
// Non-null buffers must be valid for `len` writes.
enum BoxdynStatus boxdyn_field_copy(const struct BoxdynField *field,
                                    double *x,
                                    double *re,
                                    double *im,
                                    size_t len);

// Weak momentum value `Re P_w` of `field` at `x`.
//
// # Safety
// `field` must come from a field constructor; `params` may be null; `out`
// must be valid for writes.
enum BoxdynStatus boxdyn_field_weak_momentum(const struct BoxdynField *field,
                                             const struct BoxdynParams *params,
                                             double x,
                                             double *out);

// Releases a field; null is ignored.
//
// # Safety
// `field` must be null or come from a field constructor, and must not be
// used afterwards.
void boxdyn_field_free(struct BoxdynField *field);

// Runs a scenario from TOML text, writing outputs to `out_dir`.
// `passed` receives 1 when every check passed and 0 otherwise.
//
// # Safety
// The strings must be NUL-terminated; `passed` must be valid for writes.
enum BoxdynStatus boxdyn_run_scenario(const char *scenario,
                                      const char *config_toml,
                                      const char *out_dir,
                                      int *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOXDYN_H */
