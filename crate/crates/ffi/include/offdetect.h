#ifndef OFFDETECT_H
#define OFFDETECT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OffdStatus {
  OFFD_STATUS_OK = 0,
  OFFD_STATUS_NULL_ARGUMENT = 1,
  OFFD_STATUS_INVALID_UTF8 = 2,
  OFFD_STATUS_INVALID_INPUT = 3,
  OFFD_STATUS_IO = 4,
  OFFD_STATUS_FORMAT = 5,
  OFFD_STATUS_CONFIG = 6,
  OFFD_STATUS_INTERNAL = 7,
} OffdStatus;

/**
 * A loaded classifier. Opaque to C.
 */
typedef struct OffdClassifier OffdClassifier;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a classifier saved by `offdetect train`. On success `*out` owns a
 * handle for `offd_classifier_free`; on failure it is set to null.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OffdStatus offd_classifier_load(const char *path, struct OffdClassifier **out);

/**
 * Writes the probability that `text` is offensive to `*out_prob`.
 *
 * # Safety
 * `handle` must come from `offd_classifier_load`, `text` must be
 * NUL-terminated and `out_prob` valid.
 */
enum OffdStatus offd_classifier_predict(const struct OffdClassifier *handle,
                                        const char *text,
                                        double *out_prob);

/**
 * `"gbdt"` or `"transformer"`; static storage, never freed. Null for a null handle.
 *
 * # Safety
 * `handle` must be null or come from `offd_classifier_load`.
 */
const char *offd_classifier_kind(const struct OffdClassifier *handle);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `handle` must be null or an unfreed handle from `offd_classifier_load`.
 */
void offd_classifier_free(struct OffdClassifier *handle);

/**
 * Applies emoji and hashtag normalization using the resources named by
 * `OFFDETECT_RESOURCES`, or the bundled ones. `*out` receives a string for
 * `offd_string_free`.
 *
 * # Safety
 * `text` must be NUL-terminated and `out` valid.
 */
enum OffdStatus offd_preprocess(const char *text, char **out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or an unfreed string from this library.
 */
void offd_string_free(char *s);

/**
 * The score-to-label rule: 1 for offensive, 0 for not, -1 if the thresholds
 * are invalid (see `offd_last_error_message`).
 */
int offd_score_to_label(double average,
                        double stdev,
                        double hi_threshold,
                        double lo_threshold,
                        double std_threshold);

/**
 * Message of the last failure on this thread, empty after a success. Valid
 * until the next call into this library on the same thread.
 */
const char *offd_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OFFDETECT_H */
