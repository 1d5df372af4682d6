/* C ABI for the interactee prediction library. */

#ifndef INTERACTEE_H
#define INTERACTEE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible call.
typedef enum ItcStatus {
  Ok = 0,
  NullArgument = 1,
  InvalidArgument = 2,
  LayoutMismatch = 3,
  TooFewExamples = 4,
  IoError = 5,
  InternalError = 6,
} ItcStatus;

// Opaque KNN model handle.
typedef struct ItcKnnModel ItcKnnModel;

// Opaque MDN handle.
typedef struct ItcMdnModel ItcMdnModel;

// Axis-aligned box, pixels.
typedef struct ItcBox {
  double x_min;
  double y_min;
  double width;
  double height;
} ItcBox;

// Person-normalized localization parameters.
typedef struct ItcParams {
  double dx;
  double dy;
  double a;
} ItcParams;

// MDN training configuration.
typedef struct ItcMdnConfig {
  size_t hidden_width;
  size_t components;
  size_t iterations;
  double learning_rate;
  size_t batch_size;
  uint64_t seed;
  double sigma_floor;
} ItcMdnConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message into `buf` (NUL terminated, truncating)
// and returns the full message length in bytes, excluding the NUL.
// A zero return means no error is stored. `buf` may be null to query the
// needed length.
//
// # Safety
// `buf` must point to `len` writable bytes, or be null.
size_t itc_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *itc_version(void);

// Person scale: sqrt of the box area. Returns a negative value on an
// invalid box.
double itc_person_scale(struct ItcBox person);

// Person-normalized localization of an interactee box.
//
// # Safety
// `out` must point to a writable `ItcParams`.
enum ItcStatus itc_normalize_localization(struct ItcBox person,
                                          struct ItcBox interactee,
                                          struct ItcParams *out);

// Square pixel box for localization parameters on a person.
//
// # Safety
// `out` must point to a writable `ItcBox`.
enum ItcStatus itc_denormalize_to_box(struct ItcParams params,
                                      struct ItcBox person,
                                      struct ItcBox *out);

// Intersection over union. Returns a negative value on invalid boxes.
double itc_iou(struct ItcBox a, struct ItcBox b);

// Near Person baseline box (centered square, 0.74 of the person's area).
//
// # Safety
// `out` must point to a writable `ItcBox`.
enum ItcStatus itc_near_person_baseline(struct ItcBox person, struct ItcBox *out);

// Consensus ground-truth box from annotator boxes via mean shift plus
// max-mean-overlap selection.
//
// # Safety
// `boxes` must point to `len` boxes; `out` must be writable.
enum ItcStatus itc_consensus_box(const struct ItcBox *boxes,
                                 size_t len,
                                 double bandwidth,
                                 struct ItcBox *out);

// Fits a KNN model on row-major descriptors (n x dim) and their
// localization parameters. On success the caller owns the handle and must
// free it with [`itc_knn_free`].
//
// # Safety
// `descriptors` must hold `n * dim` values, `params` `n` entries, and
// `out` must be writable.
enum ItcStatus itc_knn_fit(const double *descriptors,
                           size_t n,
                           size_t dim,
                           const struct ItcParams *params,
                           size_t k,
                           struct ItcKnnModel **out);

// Loads a KNN model JSON plus the descriptor store it references.
//
// # Safety
// Paths must be NUL-terminated strings; `out` must be writable.
enum ItcStatus itc_knn_load(const char *model_path,
                            const char *store_path,
                            struct ItcKnnModel **out);

// Number of stored training examples.
//
// # Safety
// `model` must be a live handle from this library.
size_t itc_knn_len(const struct ItcKnnModel *model);

// Predicts localization parameters for a flat query descriptor.
//
// # Safety
// `model` must be a live handle; `query` must hold `dim` values; `out`
// must be writable.
enum ItcStatus itc_knn_predict(const struct ItcKnnModel *model,
                               const double *query,
                               size_t dim,
                               struct ItcParams *out);

// Frees a KNN handle. Null is a no-op.
//
// # Safety
// `model` must originate from this library and not be freed twice.
void itc_knn_free(struct ItcKnnModel *model);

// Trains an MDN on row-major descriptors. The handle must be freed with
// [`itc_mdn_free`].
//
// # Safety
// `descriptors` must hold `n * dim` values, `params` `n` entries, and
// `out` must be writable.
enum ItcStatus itc_mdn_train(const double *descriptors,
                             size_t n,
                             size_t dim,
                             const struct ItcParams *params,
                             struct ItcMdnConfig config,
                             struct ItcMdnModel **out);

// Loads an MDN from its JSON file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum ItcStatus itc_mdn_load(const char *path, struct ItcMdnModel **out);

// Saves an MDN to a JSON file (bit-exact round trip).
//
// # Safety
// `model` must be a live handle; `path` a NUL-terminated string.
enum ItcStatus itc_mdn_save(const struct ItcMdnModel *model, const char *path);

// Point prediction: highest-prior component mean and its square box on
// the person.
//
// # Safety
// `model` must be a live handle; `x` must hold `dim` values; out pointers
// must be writable.
enum ItcStatus itc_mdn_predict(const struct ItcMdnModel *model,
                               const double *x,
                               size_t dim,
                               struct ItcBox person,
                               struct ItcParams *out_params,
                               struct ItcBox *out_box);

// Frees an MDN handle. Null is a no-op.
//
// # Safety
// `model` must originate from this library and not be freed twice.
void itc_mdn_free(struct ItcMdnModel *model);

// Combined BLEU of a candidate sentence against reference sentences,
// tokenized as the library does (lowercase, punctuation stripped). Writes
// the combined score to `out`.
//
// # Safety
// `candidate` and each of the `n_refs` entries of `references` must be
// NUL-terminated strings; `out` must be writable.
enum ItcStatus itc_bleu(const char *candidate,
                        const char *const *references,
                        size_t n_refs,
                        size_t max_n,
                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INTERACTEE_H */
