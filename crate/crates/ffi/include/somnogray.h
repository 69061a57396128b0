#ifndef SOMNOGRAY_H
#define SOMNOGRAY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SgStatus {
  SG_STATUS_OK = 0,
  // A required pointer argument was null.
  SG_STATUS_NULL_POINTER = 1,
  // An argument was out of range or a buffer had the wrong length.
  SG_STATUS_INVALID_ARGUMENT = 2,
  // Input data could not be read or failed validation.
  SG_STATUS_DATA = 3,
  // A numeric routine failed.
  SG_STATUS_NUMERIC = 4,
  // An internal panic was caught at the boundary.
  SG_STATUS_PANIC = 5,
} SgStatus;

// Uncertainty metric selector.
typedef enum SgMetric {
  SG_METRIC_LEAST_CONFIDENCE = 0,
  SG_METRIC_MARGIN = 1,
  SG_METRIC_RATIO = 2,
  SG_METRIC_UNLIKEABILITY = 3,
  SG_METRIC_ENTROPY = 4,
} SgMetric;

// Opaque per-epoch stage probabilities.
typedef struct SgHypnodensity SgHypnodensity;

// Opaque trained stager.
typedef struct SgModel SgModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *sg_version(void);

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next call into the library on the same thread.
const char *sg_last_error_message(void);

// Builds a hypnodensity from `n_epochs × 5` row-major probabilities.
//
// # Safety
// `probs` must point to `n_epochs * 5` readable doubles and `out` to a
// writable handle slot.
enum SgStatus sg_hypnodensity_new(const double *probs,
                                  size_t n_epochs,
                                  struct SgHypnodensity **out);

// Reads a hypnodensity CSV file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable handle slot.
enum SgStatus sg_hypnodensity_read_csv(const char *path, struct SgHypnodensity **out);

// Number of epochs, or 0 for a null handle.
//
// # Safety
// `h` must be null or a live handle.
size_t sg_hypnodensity_len(const struct SgHypnodensity *h);

// Copies the probabilities into `out` (`len` must equal epochs × 5).
//
// # Safety
// `h` must be a live handle and `out` must hold `len` writable doubles.
enum SgStatus sg_hypnodensity_copy(const struct SgHypnodensity *h, double *out, size_t len);

// Releases a hypnodensity. Null is ignored.
//
// # Safety
// `h` must be null or a handle not yet freed.
void sg_hypnodensity_free(struct SgHypnodensity *h);

// Writes one uncertainty value per epoch into `out`.
//
// # Safety
// `h` must be a live handle and `out` must hold `len` writable doubles.
enum SgStatus sg_uncertainty(const struct SgHypnodensity *h,
                             enum SgMetric metric,
                             double *out,
                             size_t len);

// Marks the `round(pct × epochs)` most uncertain epochs with 1 in `mask`.
//
// # Safety
// `h` must be a live handle and `mask` must hold `len` writable bytes.
enum SgStatus sg_gray_rank(const struct SgHypnodensity *h,
                           enum SgMetric metric,
                           double pct,
                           uint8_t *mask,
                           size_t len);

// Marks epochs strictly more uncertain than `threshold` with 1 in `mask`.
//
// # Safety
// `h` must be a live handle and `mask` must hold `len` writable bytes.
enum SgStatus sg_gray_threshold(const struct SgHypnodensity *h,
                                enum SgMetric metric,
                                double threshold,
                                uint8_t *mask,
                                size_t len);

// Accuracy and Cohen's kappa of two stage sequences. Codes are 0 W, 1 N1,
// 2 N2, 3 N3, 4 REM and 5 unscored; unscored epochs are skipped.
//
// # Safety
// `reference` and `predicted` must hold `n` readable bytes; `accuracy` and
// `kappa` must be writable.
enum SgStatus sg_agreement(const uint8_t *reference,
                           const uint8_t *predicted,
                           size_t n,
                           double *accuracy,
                           double *kappa);

// Loads a trained stager from a model JSON file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable handle slot.
enum SgStatus sg_model_load(const char *path, struct SgModel **out);

// Stages one raw channel sampled at `fs` Hz with the default preprocessing.
//
// # Safety
// `model` must be a live handle, `samples` must hold `n` readable doubles
// and `out` must be a writable handle slot.
enum SgStatus sg_model_stage(const struct SgModel *model,
                             const double *samples,
                             size_t n,
                             double fs,
                             struct SgHypnodensity **out);

// Releases a model. Null is ignored.
//
// # Safety
// `m` must be null or a handle not yet freed.
void sg_model_free(struct SgModel *m);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOMNOGRAY_H */
