#ifndef MTFR_H
#define MTFR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MtfrStatus {
  MTFR_STATUS_OK = 0,
  MTFR_STATUS_NULL_POINTER = 1,
  MTFR_STATUS_INVALID_INPUT = 2,
  MTFR_STATUS_INTERNAL = 3,
  MTFR_STATUS_VERIFICATION_FAILED = 4,
} MtfrStatus;

/**
 * An Alternative I/II certificate.
 */
typedef struct MtfrCertificate MtfrCertificate;

/**
 * A validated element of `Sp(2n, R)`.
 */
typedef struct MtfrSymplectic MtfrSymplectic;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *mtfr_last_error_message(void);

/**
 * Validates the row-major `2n x 2n` matrix `data` as symplectic.
 *
 * # Safety
 * `data` must point to `4 n^2` doubles and `out` to writable storage.
 */
enum MtfrStatus mtfr_symplectic_new(const double *data, size_t n, struct MtfrSymplectic **out);

/**
 * # Safety
 * `handle` must come from [`mtfr_symplectic_new`] and not be freed twice.
 */
void mtfr_symplectic_free(struct MtfrSymplectic *handle);

/**
 * Half-dimension `n` of the matrix.
 *
 * # Safety
 * `handle` must be a live handle and `out` writable.
 */
enum MtfrStatus mtfr_symplectic_dim(const struct MtfrSymplectic *handle, size_t *out);

/**
 * Writes `Q`, `L` (`n x n`, real) and `Re U`, `Im U` (`n x n`) of `M = V_Q D_L R_U`.
 *
 * # Safety
 * `handle` must be live; each output must hold `n^2` doubles.
 */
enum MtfrStatus mtfr_pre_iwasawa(const struct MtfrSymplectic *handle,
                                 double *q,
                                 double *l,
                                 double *u_re,
                                 double *u_im);

/**
 * Classifies a matrix in `Sp(4d)` and builds its certificate.
 *
 * # Safety
 * `handle` must be live and `out` writable.
 */
enum MtfrStatus mtfr_certificate_classify(const struct MtfrSymplectic *handle,
                                          struct MtfrCertificate **out);

/**
 * # Safety
 * `cert` must come from [`mtfr_certificate_classify`] and not be freed twice.
 */
void mtfr_certificate_free(struct MtfrCertificate *cert);

/**
 * Writes 1 or 2 for Alternative I or II, and `d`.
 *
 * # Safety
 * `cert` must be live and the outputs writable.
 */
enum MtfrStatus mtfr_certificate_alternative(const struct MtfrCertificate *cert,
                                             uint32_t *alternative,
                                             size_t *d);

/**
 * Number `k` of transformed variables of an Alternative II certificate.
 *
 * # Safety
 * `cert` must be live and `k` writable.
 */
enum MtfrStatus mtfr_certificate_k(const struct MtfrCertificate *cert, size_t *k);

/**
 * The `2d x 2d` matrix `Omega` of an Alternative II certificate.
 *
 * # Safety
 * `cert` must be live and `omega` must hold `4 d^2` doubles.
 */
enum MtfrStatus mtfr_certificate_omega(const struct MtfrCertificate *cert, double *omega);

/**
 * The certificate as JSON; release with [`mtfr_string_free`].
 *
 * # Safety
 * `cert` must be live and `out` writable.
 */
enum MtfrStatus mtfr_certificate_to_json(const struct MtfrCertificate *cert, char **out);

/**
 * Re-verifies an Alternative II certificate on two random generalized
 * Gaussians drawn from `seed`, at `points` evaluation points. Writes the
 * maximal relative error and returns `VerificationFailed` above `threshold`.
 *
 * # Safety
 * `cert` must be live and `max_rel_error` writable.
 */
enum MtfrStatus mtfr_certificate_verify_gaussians(const struct MtfrCertificate *cert,
                                                  uint64_t seed,
                                                  size_t points,
                                                  double threshold,
                                                  double *max_rel_error);

/**
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void mtfr_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MTFR_H */
