#ifndef PATCHKERN_H
#define PATCHKERN_H

/* Generated by cbindgen from patchkern-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum PkStatus {
  PK_STATUS_OK = 0,
  /**
   * Numerical or state failure at run time.
   */
  PK_STATUS_RUNTIME_ERROR = 1,
  /**
   * Invalid argument or configuration.
   */
  PK_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A required pointer was null.
   */
  PK_STATUS_NULL_POINTER = 3,
} PkStatus;

/**
 * Opaque composite kernel handle.
 */
typedef struct PkKernel PkKernel;

/**
 * Opaque spectrum handle: enumerated eigenvalues, optionally with target
 * coefficient variances attached.
 */
typedef struct PkSpectrum PkSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message (NUL-terminated, truncated to `len`).
 * Returns the number of bytes written, excluding the terminator.
 */
uintptr_t patchkern_last_error_message(char *buf, uintptr_t len);

/**
 * Build a composite kernel.
 *
 * `constituent`: 0 = Laplacian, 1 = analytic ReLU NTK, 2 = random-feature
 * NTK (uses `h`, `seed`), 3 = power-law spectral (uses `alpha`, `mass`;
 * spectral kernels reject real-space evaluation).
 */
enum PkStatus patchkern_kernel_new(int32_t kind,
                                   int32_t constituent,
                                   uintptr_t d,
                                   uintptr_t s,
                                   bool overlap,
                                   double alpha,
                                   double mass,
                                   uintptr_t h,
                                   uint64_t seed,
                                   struct PkKernel **out);

/**
 * Free a kernel handle (null is a no-op).
 */
void patchkern_kernel_free(struct PkKernel *kernel);

/**
 * Evaluate `K(x, y)` on two `d`-vectors.
 */
enum PkStatus patchkern_kernel_eval(const struct PkKernel *kernel,
                                    const double *x,
                                    const double *y,
                                    uintptr_t d,
                                    double *out);

/**
 * Fill `out` (p x p, row-major) with the Gram matrix of `points` (p x d).
 */
enum PkStatus patchkern_gram(const struct PkKernel *kernel,
                             const double *points,
                             uintptr_t p,
                             uintptr_t d,
                             double *out);

/**
 * Draw points on a domain (0 = cube, 1 = sphere, 2 = torus) into `out`
 * (p x d row-major).
 */
enum PkStatus patchkern_sample_points(int32_t domain,
                                      uintptr_t p,
                                      uintptr_t d,
                                      uint64_t seed,
                                      double *out);

/**
 * Sample the kernel's Gaussian field on `points` (n x d) into `values`.
 */
enum PkStatus patchkern_sample_field(const struct PkKernel *kernel,
                                     const double *points,
                                     uintptr_t n,
                                     uintptr_t d,
                                     uint64_t seed,
                                     double *values,
                                     double *jitter_used);

/**
 * Fit kernel ridge regression (`lambda = 0` for ridgeless) and predict on
 * `x_test` (q x d) into `y_out`.
 */
enum PkStatus patchkern_fit_predict(const struct PkKernel *kernel,
                                    const double *x_train,
                                    uintptr_t p,
                                    const double *y_train,
                                    const double *x_test,
                                    uintptr_t q,
                                    uintptr_t d,
                                    double lambda,
                                    double *y_out);

/**
 * Enumerate a composite power-law spectrum up to `k_max` (0 picks a cutoff
 * with at least 100000 modes).
 */
enum PkStatus patchkern_spectrum_new(int32_t kind,
                                     uintptr_t s,
                                     uintptr_t d,
                                     bool overlap,
                                     double alpha,
                                     double mass,
                                     double amplitude,
                                     double k_max,
                                     struct PkSpectrum **out);

void patchkern_spectrum_free(struct PkSpectrum *spectrum);

/**
 * Number of enumerated entries (eigenvalue families).
 */
uintptr_t patchkern_spectrum_len(const struct PkSpectrum *spectrum);

/**
 * Number of eigenfunctions counting degeneracy.
 */
uint64_t patchkern_spectrum_modes(const struct PkSpectrum *spectrum);

/**
 * Read entry `index` (descending eigenvalue order): wavevector modulus,
 * constituent and composite eigenvalues, degeneracy, window class u, and
 * the target variance (0 unless coefficients are attached).
 */
enum PkStatus patchkern_spectrum_entry(const struct PkSpectrum *spectrum,
                                       uintptr_t index,
                                       double *k,
                                       double *lambda,
                                       double *big_lambda,
                                       uint64_t *degeneracy,
                                       int32_t *class_u,
                                       double *target_var);

/**
 * Attach teacher coefficient variances to the spectrum (teacher shares the
 * student's d and overlap policy). Returns PK_RUNTIME_ERROR for
 * incompatible schemes.
 */
enum PkStatus patchkern_attach_teacher(struct PkSpectrum *spectrum,
                                       int32_t teacher_kind,
                                       uintptr_t t,
                                       double alpha_t,
                                       double mass_t,
                                       double amplitude_t,
                                       bool *representable_out);

/**
 * Tail sum B(P): target power past the first `p` eigenmodes.
 */
enum PkStatus patchkern_tail_power(const struct PkSpectrum *spectrum, uintptr_t p, double *out);

/**
 * Replica estimate of the generalization error at (p, lambda).
 */
enum PkStatus patchkern_replica_error(const struct PkSpectrum *spectrum,
                                      uintptr_t p,
                                      double lambda,
                                      double *out);

/**
 * Decaying-ridge estimate: target power on modes with `Lambda < lambda`.
 */
enum PkStatus patchkern_ridge_threshold_sum(const struct PkSpectrum *spectrum,
                                            double lambda,
                                            double *out);

/**
 * Modulus of the P-th largest eigenvalue's wavevector.
 */
enum PkStatus patchkern_cutoff_modulus(const struct PkSpectrum *spectrum, uintptr_t p, double *out);

/**
 * Closed-form learning-curve exponent. `ridge_mode`: 0 ridgeless, 1 fixed,
 * 2 decaying. On success `*beta_out` holds the exponent and `*plateau_out`
 * is false; a plateau sets `*plateau_out` and leaves `*beta_out` at 0.
 */
enum PkStatus patchkern_predicted_beta(double alpha_t,
                                       uintptr_t t,
                                       double alpha_s,
                                       uintptr_t s,
                                       int32_t student_kind,
                                       bool overlap,
                                       int32_t ridge_mode,
                                       double lambda0,
                                       double gamma,
                                       double *beta_out,
                                       bool *plateau_out);

/**
 * OLS power-law fit of (ps, errs) over the inclusive window
 * [p_low, p_high]: `error ~ P^-beta`.
 */
enum PkStatus patchkern_fit_exponent(const double *ps,
                                     const double *errs,
                                     uintptr_t n,
                                     double p_low,
                                     double p_high,
                                     double *beta_out,
                                     double *stderr_out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* PATCHKERN_H */
