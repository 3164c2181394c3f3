#ifndef LOCALTIME_LAB_H
#define LOCALTIME_LAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LabClosedForm {
  LAB_CLOSED_FORM_K = 0,
  LAB_CLOSED_FORM_L = 1,
  LAB_CLOSED_FORM_K_STAR = 2,
  LAB_CLOSED_FORM_L_STAR = 3,
  LAB_CLOSED_FORM_SURVIVAL = 4,
  // `E_x L₀(τ)`; ignores γ and λ.
  LAB_CLOSED_FORM_MEAN_LOCAL_TIME = 5,
} LabClosedForm;

typedef enum LabKernelKind {
  LAB_KERNEL_KIND_BOX = 0,
  LAB_KERNEL_KIND_TRIANGLE = 1,
  LAB_KERNEL_KIND_GAUSSIAN = 2,
} LabKernelKind;

typedef enum LabStatus {
  LAB_STATUS_OK = 0,
  LAB_STATUS_NULL_POINTER = 1,
  LAB_STATUS_INVALID_ARGUMENT = 2,
  // Grid step too coarse for the kernel.
  LAB_STATUS_RESOLUTION = 3,
  LAB_STATUS_NO_CONVERGENCE = 4,
  LAB_STATUS_INCONSISTENT_EIGENPAIR = 5,
  LAB_STATUS_NUMERICAL = 6,
  LAB_STATUS_BUFFER_TOO_SMALL = 7,
  LAB_STATUS_PANIC = 8,
} LabStatus;

// Eigenfunctions `k`, `ℓ` of `A_ε` on a grid.
typedef struct LabEigenPair LabEigenPair;

// Killing profile `c`.
typedef struct LabKernel LabKernel;

typedef struct LabEstimate {
  double value;
  double std_error;
  double exact;
} LabEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL. Valid until the next
// failing call on the same thread.
const char *lab_last_error(void);

// Unit profile of the given kind rescaled to mass `gamma`.
//
// # Safety
// `out` must be valid for writes.
enum LabStatus lab_kernel_new(enum LabKernelKind kind, double gamma, struct LabKernel **out);

// # Safety
// `kernel` must come from [`lab_kernel_new`] and `out` be valid for writes.
enum LabStatus lab_kernel_gamma(const struct LabKernel *kernel, double *out);

// # Safety
// `kernel` must come from [`lab_kernel_new`] or be NULL; it is invalid afterwards.
void lab_kernel_free(struct LabKernel *kernel);

// Number of nodes of the grid on `[a, b]` with step `h`.
//
// # Safety
// `out` must be valid for writes.
enum LabStatus lab_grid_len(double a, double b, double h, size_t *out);

// One closed-form value of the limit problem at `x`.
//
// # Safety
// `out` must be valid for writes.
enum LabStatus lab_closed_form(enum LabClosedForm what,
                               double x,
                               double a,
                               double b,
                               double gamma,
                               double lambda,
                               double *out);

// Picard solve of `k`, `ℓ` for `c_ε` on `[a, b]` with step `h`.
//
// # Safety
// `kernel` must come from [`lab_kernel_new`] and `out` be valid for writes.
enum LabStatus lab_eigenpair_solve(const struct LabKernel *kernel,
                                   double eps,
                                   double a,
                                   double b,
                                   double h,
                                   double lambda,
                                   struct LabEigenPair **out);

// # Safety
// `pair` must come from [`lab_eigenpair_solve`] and `out` be valid for writes.
enum LabStatus lab_eigenpair_len(const struct LabEigenPair *pair, size_t *out);

// The Wronskian `W = k'ℓ - kℓ'`.
//
// # Safety
// `pair` must come from [`lab_eigenpair_solve`] and `out` be valid for writes.
enum LabStatus lab_eigenpair_wronskian(const struct LabEigenPair *pair, double *out);

// Copies nodes, `k` and `ℓ` into buffers of length `len`; any buffer may be NULL.
//
// # Safety
// `pair` must come from [`lab_eigenpair_solve`]; non-null buffers must hold `len` doubles.
enum LabStatus lab_eigenpair_copy(const struct LabEigenPair *pair,
                                  double *x,
                                  double *k,
                                  double *l,
                                  size_t len);

// # Safety
// `pair` must come from [`lab_eigenpair_solve`] or be NULL; it is invalid afterwards.
void lab_eigenpair_free(struct LabEigenPair *pair);

// `R(λ, A) g` for the limit generator; `g` and `out` hold one value per grid node.
//
// # Safety
// `g` must hold `len` readable doubles and `out` `len` writable ones.
enum LabStatus lab_resolvent_limit(double a,
                                   double b,
                                   double gamma,
                                   double lambda,
                                   double h,
                                   const double *g,
                                   double *out,
                                   size_t len);

// Monte Carlo estimate of `E_x exp(-γ L₀(τ))`.
//
// # Safety
// `out` must be valid for writes.
enum LabStatus lab_mc_survival(double x,
                               double a,
                               double b,
                               double gamma,
                               double dt,
                               size_t n_paths,
                               uint64_t seed,
                               struct LabEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOCALTIME_LAB_H */
