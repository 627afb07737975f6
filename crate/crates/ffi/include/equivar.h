#ifndef EQUIVAR_H
#define EQUIVAR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes.
 */
typedef enum EqvStatus {
  EQV_STATUS_OK = 0,
  EQV_STATUS_NULL_POINTER = 1,
  EQV_STATUS_INVALID_STRING = 2,
  EQV_STATUS_UNKNOWN_ACTION = 3,
  EQV_STATUS_UNREGISTERED_AMPLITUDE = 4,
  EQV_STATUS_DOMAIN = 5,
  EQV_STATUS_NOT_CRITICAL = 6,
  EQV_STATUS_DEGENERATE = 7,
  EQV_STATUS_RESOLUTION_INSUFFICIENT = 8,
  EQV_STATUS_NON_CONVERGENCE = 9,
  EQV_STATUS_INVALID = 10,
  EQV_STATUS_BUFFER_TOO_SMALL = 11,
  EQV_STATUS_PANIC = 12,
} EqvStatus;

/**
 * Opaque action handle.
 */
typedef struct EqvAction EqvAction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a catalogue action by name into `*out`.
 *
 * # Safety
 * `name` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum EqvStatus eqv_action_load(const char *name, struct EqvAction **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `a` must come from [`eqv_action_load`] and not be used afterwards.
 */
void eqv_action_free(struct EqvAction *a);

/**
 * Writes `n`, `d` and `kappa` of the action.
 *
 * # Safety
 * All pointers must be valid.
 */
enum EqvStatus eqv_action_dims(const struct EqvAction *a,
                               uint32_t *n,
                               uint32_t *d,
                               uint32_t *kappa);

/**
 * Leading coefficient `L0` for a registered amplitude.
 *
 * # Safety
 * All pointers must be valid; `amp` NUL-terminated.
 */
enum EqvStatus eqv_leading_coefficient(const struct EqvAction *a,
                                       const char *amp,
                                       double *re,
                                       double *im);

/**
 * Brute-force `I(mu)` for a registered amplitude.
 *
 * # Safety
 * All pointers must be valid; `amp` NUL-terminated.
 */
enum EqvStatus eqv_integral(const struct EqvAction *a,
                            const char *amp,
                            double mu,
                            double *re,
                            double *im);

/**
 * Phase `psi = eta(X~)` at a point of chart `chart`.
 *
 * # Safety
 * `q` and `p` must hold `n` values, `s` `d` values; `chart` NUL-terminated.
 */
enum EqvStatus eqv_phase(const struct EqvAction *a,
                         const char *chart,
                         const double *q,
                         const double *p,
                         const double *s,
                         double *out);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated).
 *
 * # Safety
 * `buf` must have room for `len` bytes.
 */
enum EqvStatus eqv_last_error(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EQUIVAR_H */
