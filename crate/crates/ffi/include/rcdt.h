#ifndef RCDT_H
#define RCDT_H

#include <stddef.h>

// Status codes. Values from 10 upward coincide with the CLI exit codes.
typedef enum {
  RCDT_STATUS_OK = 0,
  // Internal failure (a panic was caught at the boundary).
  RCDT_STATUS_INTERNAL = 1,
  // Null pointer, bad string or undersized output buffer.
  RCDT_STATUS_INVALID_ARGUMENT = 2,
  RCDT_STATUS_ALL_ZERO_IMAGE = 10,
  RCDT_STATUS_INVALID_GRID = 11,
  RCDT_STATUS_INVALID_DENSITY = 12,
  RCDT_STATUS_NON_MONOTONE_CDF = 13,
  RCDT_STATUS_NON_MONOTONE_INPUT = 14,
  RCDT_STATUS_GRID_TOO_SMALL = 15,
  RCDT_STATUS_DIMENSION_MISMATCH = 16,
  RCDT_STATUS_DEGENERATE_CLASS = 17,
  RCDT_STATUS_MISSING_CLASS = 18,
  RCDT_STATUS_FORMAT_VERSION_MISMATCH = 19,
  RCDT_STATUS_CORRUPT_FILE = 20,
  RCDT_STATUS_BAD_MAGIC = 21,
  RCDT_STATUS_COUNT_MISMATCH = 22,
  RCDT_STATUS_TRUNCATED_FILE = 23,
  RCDT_STATUS_SUPPORT_CLIPPED = 24,
  RCDT_STATUS_INSUFFICIENT_SAMPLES = 25,
  RCDT_STATUS_EMPTY_TEST_SET = 26,
  RCDT_STATUS_OVERLAPPING_SPECS = 27,
  RCDT_STATUS_INVALID_CONFIG = 28,
  RCDT_STATUS_IO = 29,
} RcdtStatus;

// Trained nearest-subspace classifier.
typedef struct RcdtModel RcdtModel;

// Forward transform bound to one image size and angle count.
typedef struct RcdtTransformer RcdtTransformer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *rcdt_last_error(void);

// Library version as a static NUL-terminated string.
const char *rcdt_version(void);

// Creates a transformer for `height` x `width` images with `n_angles`
// projection angles and positivity floor `epsilon`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
RcdtStatus rcdt_transformer_new(size_t height,
                                size_t width,
                                size_t n_angles,
                                double epsilon,
                                RcdtTransformer **out);

// # Safety
// `t` must be null or a handle from [`rcdt_transformer_new`] not yet freed.
void rcdt_transformer_free(RcdtTransformer *t);

// Number of values in one transformed field (offsets times angles), or 0
// for a null handle.
//
// # Safety
// `t` must be null or a live transformer handle.
size_t rcdt_transformer_field_len(const RcdtTransformer *t);

// Transforms one non-negative image. The field is written angle-major into
// `out`, which must hold at least [`rcdt_transformer_field_len`] values.
//
// # Safety
// `pixels` must point to `height * width` readable values and `out` to
// `out_len` writable values.
RcdtStatus rcdt_transformer_forward(const RcdtTransformer *t,
                                    const double *pixels,
                                    size_t height,
                                    size_t width,
                                    double *out,
                                    size_t out_len);

// Sliced-Wasserstein-2 distance between two images of the transformer's
// size, each normalized to unit mass first.
//
// # Safety
// `a` and `b` must each point to `height * width` values; `out` must be
// writable.
RcdtStatus rcdt_sw2_distance(const RcdtTransformer *t,
                             const double *a,
                             const double *b,
                             size_t height,
                             size_t width,
                             double *out);

// Trains a classifier on `n` images of `height` x `width` stored back to
// back, with labels in `0..K`. `enrich_translation` is a boolean.
//
// # Safety
// `images` must point to `n * height * width` values, `labels` to `n`
// values and `out` to storage for one handle.
RcdtStatus rcdt_model_fit(const double *images,
                          const size_t *labels,
                          size_t n,
                          size_t height,
                          size_t width,
                          size_t n_angles,
                          double epsilon,
                          double variance_fraction,
                          int enrich_translation,
                          RcdtModel **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
RcdtStatus rcdt_model_load(const char *path, RcdtModel **out);

// # Safety
// `m` must be a live model handle and `path` a NUL-terminated string.
RcdtStatus rcdt_model_save(const RcdtModel *m, const char *path);

// # Safety
// `m` must be null or a handle not yet freed.
void rcdt_model_free(RcdtModel *m);

// Number of classes, or 0 for a null handle.
//
// # Safety
// `m` must be null or a live model handle.
size_t rcdt_model_num_classes(const RcdtModel *m);

// Image size the model was trained on.
//
// # Safety
// `m` must be a live model handle; `height` and `width` must be writable.
RcdtStatus rcdt_model_image_shape(const RcdtModel *m, size_t *height, size_t *width);

// Dimension of the subspace kept for class `class_id`.
//
// # Safety
// `m` must be a live model handle; `out` must be writable.
RcdtStatus rcdt_model_class_rank(const RcdtModel *m, size_t class_id, size_t *out);

// Classifies one image. If `distances` is not null it receives the squared
// distance to every class and must hold [`rcdt_model_num_classes`] values.
//
// # Safety
// `pixels` must point to `height * width` values, `label` must be writable
// and `distances`, if not null, must point to `distances_len` values.
RcdtStatus rcdt_model_predict(const RcdtModel *m,
                              const double *pixels,
                              size_t height,
                              size_t width,
                              size_t *label,
                              double *distances,
                              size_t distances_len);

// Classifies `n` images stored back to back, writing one label each.
//
// # Safety
// `images` must point to `n * height * width` values and `labels` to `n`
// writable values.
RcdtStatus rcdt_model_predict_batch(const RcdtModel *m,
                                    const double *images,
                                    size_t n,
                                    size_t height,
                                    size_t width,
                                    size_t *labels);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RCDT_H */
