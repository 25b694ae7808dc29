/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef FRACTAL_FOURIER_H
#define FRACTAL_FOURIER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes; the nonzero values match the command-line exit codes.
typedef enum FfStatus {
  FF_STATUS_OK = 0,
  // A required pointer was null or a string was not valid UTF-8.
  FF_STATUS_INVALID_ARGUMENT = 1,
  FF_STATUS_CONFIG_INVALID = 2,
  FF_STATUS_INCONSISTENT_PROFILE = 3,
  FF_STATUS_RESOURCE_EXCEEDED = 4,
  FF_STATUS_INTERNAL = 5,
} FfStatus;

// A self-similar IFS together with its weights.
typedef struct FfIfs FfIfs;

// A smooth map used for pushforward transforms.
typedef struct FfMap FfMap;

// Dimension exponents of a measure.
typedef struct FfProfile FfProfile;

typedef struct FfProfileSummary {
  size_t k;
  double kappa2;
  double kappa_star;
  double d_inf;
  bool ad_regular;
} FfProfileSummary;

// One transform value with its error bound.
typedef struct FfSample {
  double re;
  double im;
  double error_bound;
  uint64_t leaves_used;
  // False when the bound rests on estimated derivative bounds.
  bool certified;
} FfSample;

typedef struct FfDecayBound {
  double sigma;
  double best_p;
  // NaN when `sigma` is zero.
  double gamma;
  double conjectural_ceiling;
  bool applicable;
} FfDecayBound;

typedef struct FfCondition {
  bool holds;
  // Left side minus right side of the deciding inequality.
  double margin;
} FfCondition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *ff_last_error_message(void);

// Parses an IFS description (the same JSON as the command-line IFS files).
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum FfStatus ff_ifs_from_json(const char *json, struct FfIfs **out);

// # Safety
// `ifs` must be null or a handle from [`ff_ifs_from_json`] not yet freed.
void ff_ifs_free(struct FfIfs *ifs);

// Dimension of the space the IFS acts on, or 0 for a null handle.
//
// # Safety
// `ifs` must be null or a live handle.
size_t ff_ifs_ambient_dim(const struct FfIfs *ifs);

// Similarity dimension of the attractor (root of `Σ rᵢ^s = 1`).
//
// # Safety
// `ifs` must be a live handle and `out` a valid pointer.
enum FfStatus ff_similarity_dimension(const struct FfIfs *ifs, double *out);

// Builds the dimension profile of the IFS measure. `overrides_json` may be
// null; otherwise it holds exponent overrides such as `{"kappa2": 0.5}`.
//
// # Safety
// `ifs` must be a live handle, `overrides_json` null or NUL-terminated,
// `out` a valid pointer.
enum FfStatus ff_profile_build(const struct FfIfs *ifs,
                               const char *overrides_json,
                               struct FfProfile **out);

// A profile given directly by its exponents, checked for consistency.
//
// # Safety
// `out` must be a valid pointer.
enum FfStatus ff_profile_manual(size_t k,
                                double kappa2,
                                double kappa_star,
                                double d_inf,
                                struct FfProfile **out);

// # Safety
// `profile` must be a live handle and `out` a valid pointer.
enum FfStatus ff_profile_get(const struct FfProfile *profile, struct FfProfileSummary *out);

// # Safety
// `profile` must be null or a live handle.
void ff_profile_free(struct FfProfile *profile);

// Fourier transform of the IFS measure at `xi` (length = ambient dimension)
// with absolute error at most `tol`. `max_leaves = 0` uses the default budget.
//
// # Safety
// `ifs` must be a live handle, `xi` point to `len` doubles, `out` be valid.
enum FfStatus ff_mu_hat(const struct FfIfs *ifs,
                        const double *xi,
                        size_t len,
                        double tol,
                        uint64_t max_leaves,
                        struct FfSample *out);

// Parses a map description such as `{"kind": "square"}` for an IFS in ℝ^k.
//
// # Safety
// `json` must be NUL-terminated and `out` a valid pointer.
enum FfStatus ff_map_from_json(const char *json, size_t k, struct FfMap **out);

// # Safety
// `map` must be null or a live handle.
void ff_map_free(struct FfMap *map);

// Fourier transform of the image of the IFS measure under `map`.
//
// # Safety
// As for [`ff_mu_hat`]; `map` must be a live handle.
enum FfStatus ff_pushforward_hat(const struct FfIfs *ifs,
                                 const struct FfMap *map,
                                 const double *xi,
                                 size_t len,
                                 double tol,
                                 uint64_t max_leaves,
                                 struct FfSample *out);

// Decay exponent for pushforwards of a measure with this profile.
//
// # Safety
// `profile` must be a live handle and `out` a valid pointer.
enum FfStatus ff_decay_exponent(const struct FfProfile *profile, struct FfDecayBound *out);

// Common dimensions above which products of two (`t2`) or three (`t3`)
// equal-dimension sets are guaranteed large.
//
// # Safety
// `t2` and `t3` must be valid pointers.
enum FfStatus ff_symmetric_thresholds(double *t2, double *t3);

// # Safety
// `out` must be a valid pointer.
enum FfStatus ff_two_set_condition(double dim_e, double dim_f, struct FfCondition *out);

// # Safety
// `out` must be a valid pointer.
enum FfStatus ff_three_set_condition(double dim_e,
                                     double dim_f,
                                     double dim_g,
                                     struct FfCondition *out);

// Product-measure condition from the correlation dimensions of two measures.
//
// # Safety
// `out` must be a valid pointer.
enum FfStatus ff_measure_product_condition(double kappa2_mu,
                                           double kappa2_nu,
                                           bool nu_ad_regular,
                                           struct FfCondition *out);

// # Safety
// `out` must be a valid pointer.
enum FfStatus ff_high_dim_condition(size_t k, double kappa2, struct FfCondition *out);

// Decay exponent of the image under `log` of a measure with correlation
// dimension `kappa2`.
//
// # Safety
// `out` must be a valid pointer.
enum FfStatus ff_log_pushforward_sigma(double kappa2, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACTAL_FOURIER_H */
