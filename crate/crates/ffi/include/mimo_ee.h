#ifndef MIMO_EE_H
#define MIMO_EE_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Which efficiency to evaluate in [`mee_ee_point`].
typedef enum MeeMethod {
  // Exact sum-capacity efficiency.
  MEE_METHOD_DPC = 0,
  // Upper bound from the strongest eigenmode.
  MEE_METHOD_UPPER = 1,
  // Lower bound from zero-forcing dirty paper coding.
  MEE_METHOD_LOWER = 2,
  // Closed form for single-antenna links.
  MEE_METHOD_SISO = 3,
} MeeMethod;

// Status code returned by every fallible function.
typedef enum MeeStatus {
  MEE_STATUS_OK = 0,
  // A required pointer argument was null.
  MEE_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8, or an index was out of range.
  MEE_STATUS_INVALID_ARGUMENT = 2,
  // The configuration document was rejected.
  MEE_STATUS_CONFIG = 3,
  // A numeric argument was outside the admissible domain.
  MEE_STATUS_DOMAIN = 4,
  // Matrix or channel dimensions do not agree.
  MEE_STATUS_SHAPE = 5,
  // A solver or bracket search did not converge.
  MEE_STATUS_NOT_CONVERGED = 6,
  // The channel draw has too few independent rows for the lower bound.
  MEE_STATUS_RANK_DEFICIENT = 7,
  // The library panicked; this is a bug.
  MEE_STATUS_PANIC = 99,
} MeeStatus;

// One realization of all user channels.
typedef struct MeeChannels MeeChannels;

// A parsed configuration document.
typedef struct MeeConfig MeeConfig;

// Output of a scaling run.
typedef struct MeeScaling MeeScaling;

// Result of [`mee_closed_form`].
typedef struct MeeClosedForm {
  double y_star;
  double x_star;
  double xi;
  double stationarity_residual;
} MeeClosedForm;

// Result of [`mee_ee_point`].
typedef struct MeeEePoint {
  // Optimal normalized transmit power.
  double q_star;
  // Rate at `q_star`, in bits per channel use.
  double rate;
  // Normalized efficiency.
  double xi;
} MeeEePoint;

// One grid point of a scaling run. Bound columns are NaN when the mode
// does not produce them.
typedef struct MeeScalingRow {
  uint64_t k;
  double mean_xi;
  double ci_halfwidth;
  double predictor_asymptotic;
  double predictor_finite_k;
  double ratio_asymptotic;
  double ratio_finite_k;
  double mean_xi_upper;
  double mean_xi_lower;
} MeeScalingRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none failed.
// The pointer stays valid until the next failing call on the same thread.
const char *mee_last_error_message(void);

// Library name and version as a static NUL-terminated string.
const char *mee_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void mee_string_free(char *s);

// Principal branch of the Lambert W function.
//
// # Safety
// `out` must be valid for writes.
enum MeeStatus mee_lambert_w0(double x, double *out);

// Optimum of the scalar efficiency problem `y / (x + alpha)` with
// `y = m log2(1 + gamma x / m)`.
//
// # Safety
// `out` must be valid for writes.
enum MeeStatus mee_closed_form(double alpha, double gamma, size_t m, struct MeeClosedForm *out);

// Parses a JSON configuration document.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid for writes.
enum MeeStatus mee_config_from_json(const char *json, struct MeeConfig **out);

// # Safety
// `cfg` must be null or a handle from [`mee_config_from_json`] not yet freed.
void mee_config_free(struct MeeConfig *cfg);

// Normalized overhead derived from the configuration.
//
// # Safety
// `cfg` must be a live handle; `out` must be valid for writes.
enum MeeStatus mee_config_alpha(const struct MeeConfig *cfg, double *out);

// Converts a normalized efficiency to bits per Joule for this configuration.
//
// # Safety
// `cfg` must be a live handle; `out` must be valid for writes.
enum MeeStatus mee_config_denormalize(const struct MeeConfig *cfg, double xi, double *out);

// Draws Rayleigh-fading channels for every user of `cfg` from `seed`.
// The same seed gives the same channels as `mimo-ee ee-point --seed`.
//
// # Safety
// `cfg` must be a live handle; `out` must be valid for writes.
enum MeeStatus mee_channels_draw(const struct MeeConfig *cfg,
                                 uint64_t seed,
                                 struct MeeChannels **out);

// Builds channels from caller data: `users` matrices of `rx x tx` complex
// entries, row-major, each entry stored as (re, im). `len` is the number of
// doubles and must equal `2 * users * rx * tx`.
//
// # Safety
// `data` must point to `len` readable doubles; `out` must be valid for writes.
enum MeeStatus mee_channels_from_interleaved(size_t tx,
                                             size_t rx,
                                             size_t users,
                                             const double *data,
                                             size_t len,
                                             struct MeeChannels **out);

// # Safety
// `ch` must be null or a live channel handle.
void mee_channels_free(struct MeeChannels *ch);

// Number of users in `ch`, or 0 if `ch` is null.
//
// # Safety
// `ch` must be null or a live channel handle.
size_t mee_channels_users(const struct MeeChannels *ch);

// Maximizes the chosen efficiency over total transmit power. `tol` is
// used by [`MeeMethod::Dpc`] only.
//
// # Safety
// `ch` must be a live handle; `out` must be valid for writes.
enum MeeStatus mee_ee_point(const struct MeeChannels *ch,
                            enum MeeMethod method,
                            double alpha,
                            double tol,
                            struct MeeEePoint *out);

// Sum capacity in bits under total normalized power `q_total`.
//
// # Safety
// `ch` must be a live handle; `out` must be valid for writes.
enum MeeStatus mee_sum_capacity(const struct MeeChannels *ch,
                                double q_total,
                                double tol,
                                size_t max_iter,
                                double *out);

// Runs the `experiment` section of `cfg`. `seed` replaces the configured
// master seed when `override_seed` is true.
//
// # Safety
// `cfg` must be a live handle; `out` must be valid for writes.
enum MeeStatus mee_scaling_run(const struct MeeConfig *cfg,
                               bool override_seed,
                               uint64_t seed,
                               struct MeeScaling **out);

// # Safety
// `s` must be null or a live scaling handle.
void mee_scaling_free(struct MeeScaling *s);

// Number of grid points, or 0 if `s` is null.
//
// # Safety
// `s` must be null or a live scaling handle.
size_t mee_scaling_len(const struct MeeScaling *s);

// Copies grid point `index` into `out`.
//
// # Safety
// `s` must be a live handle; `out` must be valid for writes.
enum MeeStatus mee_scaling_row(const struct MeeScaling *s, size_t index, struct MeeScalingRow *out);

// The run as CSV text, identical to the CLI output. Free with
// [`mee_string_free`].
//
// # Safety
// `s` must be a live handle; `out` must be valid for writes.
enum MeeStatus mee_scaling_csv(const struct MeeScaling *s, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIMO_EE_H */
