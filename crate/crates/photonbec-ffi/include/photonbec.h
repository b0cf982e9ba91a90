#ifndef PHOTONBEC_H
#define PHOTONBEC_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call status codes.
 */
typedef enum PbecStatus {
  PBEC_STATUS_OK = 0,
  /**
   * Null pointer, bad UTF-8, or out-of-range argument.
   */
  PBEC_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Config file unreadable or invalid.
   */
  PBEC_STATUS_CONFIG = 2,
  /**
   * Steady-state solver did not converge.
   */
  PBEC_STATUS_NON_CONVERGED = 3,
  /**
   * Other numerical failure.
   */
  PBEC_STATUS_NUMERICAL = 4,
  /**
   * I/O failure.
   */
  PBEC_STATUS_IO = 5,
} PbecStatus;

/**
 * Opaque simulation configuration.
 */
typedef struct PbecConfig PbecConfig;

/**
 * Opaque solved steady state with its coherence summary.
 */
typedef struct PbecSteady PbecSteady;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the last error message for this thread (empty string when the last
 * call succeeded). The pointer stays valid until the next FFI call on the
 * same thread; do not free it.
 */
const char *pbec_last_error(void);

/**
 * Creates a configuration with the built-in defaults. Never fails.
 * Free with `pbec_config_free`.
 */
struct PbecConfig *pbec_config_default(void);

/**
 * Loads a configuration from a TOML file. On success writes the new handle
 * to `out`. Free with `pbec_config_free`.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be a valid
 * pointer.
 */
enum PbecStatus pbec_config_from_file(const char *path, struct PbecConfig **out);

/**
 * Number of cavity modes in the configuration.
 *
 * # Safety
 * `cfg` must be a live handle from this library.
 */
uintptr_t pbec_config_n_modes(const struct PbecConfig *cfg);

/**
 * Frees a configuration handle (null is a no-op).
 *
 * # Safety
 * `cfg` must be null or a live handle from this library; it is invalid after
 * this call.
 */
void pbec_config_free(struct PbecConfig *cfg);

/**
 * Solves the steady state at `pump_over_gdown` (pump rate in units of the
 * molecular decay rate) and runs the coherence analysis. On success writes
 * the new handle to `out`. Free with `pbec_steady_free`.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be a valid pointer.
 */
enum PbecStatus pbec_solve(const struct PbecConfig *cfg,
                           double pump_over_gdown,
                           struct PbecSteady **out);

/**
 * Steady-state population n_pp of `mode`.
 *
 * # Safety
 * `ss` must be a live handle; `out` must be a valid pointer.
 */
enum PbecStatus pbec_steady_population(const struct PbecSteady *ss, uintptr_t mode, double *out);

/**
 * Equal-time intermode correlation n_pq.
 *
 * # Safety
 * `ss` must be a live handle; `out` must be a valid pointer.
 */
enum PbecStatus pbec_steady_correlation(const struct PbecSteady *ss,
                                        uintptr_t p,
                                        uintptr_t q,
                                        double *out);

/**
 * Ground-mode coherence time from the propagated trace (ps; +inf when
 * divergent).
 *
 * # Safety
 * `ss` must be a live handle; `out` must be a valid pointer.
 */
enum PbecStatus pbec_steady_tau0(const struct PbecSteady *ss, double *out);

/**
 * Ground-mode closed-form coherence time (ps; +inf when divergent).
 *
 * # Safety
 * `ss` must be a live handle; `out` must be a valid pointer.
 */
enum PbecStatus pbec_steady_tau0_closed(const struct PbecSteady *ss, double *out);

/**
 * Gain-clamping ratio (A₀+E₀)f₀₀ / (κ + A₀h₀₀).
 *
 * # Safety
 * `ss` must be a live handle; `out` must be a valid pointer.
 */
enum PbecStatus pbec_steady_clamp_ratio(const struct PbecSteady *ss, double *out);

/**
 * Frees a steady-state handle (null is a no-op).
 *
 * # Safety
 * `ss` must be null or a live handle from this library; it is invalid after
 * this call.
 */
void pbec_steady_free(struct PbecSteady *ss);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHOTONBEC_H */
