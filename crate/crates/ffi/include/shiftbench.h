#ifndef SHIFTBENCH_H
#define SHIFTBENCH_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SHIFTBENCH_SPLIT_TRAIN 0

#define SHIFTBENCH_SPLIT_TEST 1

/**
 * Status codes. The non-zero library codes match the CLI exit codes.
 */
typedef enum ShiftbenchStatus {
  SHIFTBENCH_STATUS_OK = 0,
  SHIFTBENCH_STATUS_VALIDATION = 2,
  SHIFTBENCH_STATUS_IO = 3,
  SHIFTBENCH_STATUS_COVERAGE = 4,
  SHIFTBENCH_STATUS_NULL_POINTER = 5,
  SHIFTBENCH_STATUS_INVALID_UTF8 = 6,
  SHIFTBENCH_STATUS_BUFFER_TOO_SMALL = 7,
  SHIFTBENCH_STATUS_PANIC = 8,
} ShiftbenchStatus;

/**
 * Owned embedding store.
 */
typedef struct ShiftbenchEmbeddingStore ShiftbenchEmbeddingStore;

/**
 * Owned dataset manifest.
 */
typedef struct ShiftbenchManifest ShiftbenchManifest;

typedef struct ShiftbenchBox {
  double x1;
  double y1;
  double x2;
  double y2;
} ShiftbenchBox;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *shiftbench_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *shiftbench_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void shiftbench_string_free(char *s);

/**
 * Loads a JSONL manifest.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ShiftbenchStatus shiftbench_manifest_load(const char *path, struct ShiftbenchManifest **out);

/**
 * Writes a manifest as JSONL, atomically.
 *
 * # Safety
 * `manifest` must be a live handle; `path` a NUL-terminated string.
 */
enum ShiftbenchStatus shiftbench_manifest_save(const struct ShiftbenchManifest *manifest,
                                               const char *path);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `manifest` must be null or a live handle.
 */
size_t shiftbench_manifest_len(const struct ShiftbenchManifest *manifest);

/**
 * Label count for `class` within `split`.
 *
 * # Safety
 * `manifest` must be a live handle, `class` a NUL-terminated string and
 * `out` writable.
 */
enum ShiftbenchStatus shiftbench_manifest_class_count(const struct ShiftbenchManifest *manifest,
                                                      int32_t split,
                                                      const char *class_,
                                                      uint64_t *out);

/**
 * # Safety
 * `manifest` must be null or a handle not yet freed.
 */
void shiftbench_manifest_free(struct ShiftbenchManifest *manifest);

/**
 * Draws a shifted label distribution from `scenario_json` and resamples
 * `split` of `manifest` to it.
 *
 * # Safety
 * `manifest` must be a live handle, `scenario_json` a NUL-terminated string
 * and `out` writable.
 */
enum ShiftbenchStatus shiftbench_shift_simulate(const struct ShiftbenchManifest *manifest,
                                                const char *scenario_json,
                                                int32_t split,
                                                bool with_replacement,
                                                uint64_t seed,
                                                struct ShiftbenchManifest **out);

/**
 * Loads an embedding CSV (`key,dim,v0,...`).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ShiftbenchStatus shiftbench_store_load(const char *path,
                                            struct ShiftbenchEmbeddingStore **out);

/**
 * Creates an empty store; scoring then falls back to keyword embeddings.
 *
 * # Safety
 * `out` must be writable.
 */
enum ShiftbenchStatus shiftbench_store_new(size_t dims, struct ShiftbenchEmbeddingStore **out);

/**
 * # Safety
 * `store` must be null or a live handle.
 */
size_t shiftbench_store_dims(const struct ShiftbenchEmbeddingStore *store);

/**
 * # Safety
 * `store` must be null or a handle not yet freed.
 */
void shiftbench_store_free(struct ShiftbenchEmbeddingStore *store);

/**
 * Cosine similarity of two `len`-element vectors.
 *
 * # Safety
 * `x` and `y` must point to `len` readable doubles; `out` must be writable.
 */
enum ShiftbenchStatus shiftbench_cosine(const double *x, const double *y, size_t len, double *out);

/**
 * Hashed keyword embedding of `n_tokens` strings into `out[0..dims]`.
 *
 * # Safety
 * `tokens` must point to `n_tokens` NUL-terminated strings and `out` to
 * `out_len` writable doubles.
 */
enum ShiftbenchStatus shiftbench_keyword_embed(const char *const *tokens,
                                               size_t n_tokens,
                                               size_t dims,
                                               double *out,
                                               size_t out_len);

/**
 * Intersection over union of two boxes.
 *
 * # Safety
 * `out` must be writable.
 */
enum ShiftbenchStatus shiftbench_iou(struct ShiftbenchBox a, struct ShiftbenchBox b, double *out);

/**
 * Runs similarity-mapped augmentation. `dims` and `iterations` of 0 select
 * the store dimension and the real training-set size. On success `*out`
 * receives the augmented manifest and, if `report_json` is non-null, it
 * receives the augmentation report as JSON.
 *
 * # Safety
 * `real`, `synthetic` and `store` must be live handles; `out` writable;
 * `report_json` null or writable.
 */
enum ShiftbenchStatus shiftbench_augment(const struct ShiftbenchManifest *real,
                                         const struct ShiftbenchManifest *synthetic,
                                         const struct ShiftbenchEmbeddingStore *store,
                                         size_t eta,
                                         size_t beta,
                                         size_t dims,
                                         size_t iterations,
                                         uint64_t seed,
                                         struct ShiftbenchManifest **out,
                                         char **report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHIFTBENCH_H */
