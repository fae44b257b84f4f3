#ifndef LOCOMODE_H
#define LOCOMODE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LmStatus {
  LM_STATUS_OK = 0,
  LM_STATUS_NULL_POINTER = 1,
  LM_STATUS_INVALID_ARGUMENT = 2,
  LM_STATUS_IO = 3,
  LM_STATUS_FORMAT = 4,
  LM_STATUS_SHAPE_MISMATCH = 5,
  LM_STATUS_PANIC = 6,
} LmStatus;

/**
 * Channel subsets accepted by [`lm_trial_signal`].
 */
typedef enum LmSource {
  LM_SOURCE_FEET = 0,
  LM_SOURCE_TRUNK_PELVIS = 1,
  LM_SOURCE_FOREARMS = 2,
  LM_SOURCE_FUSION = 3,
} LmSource;

typedef struct LmLda LmLda;

typedef struct LmLstm LmLstm;

typedef struct LmTrial LmTrial;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *lm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lm_version(void);

/**
 * Number of 50-frame windows at stride 25 in a trial of `frames` frames.
 */
size_t lm_window_count(size_t frames);

/**
 * Six features per channel (min, max, mean, std, first, last), channel
 * major. `out_len` must equal `6 * channels`.
 *
 * # Safety
 * `window` must point to `frames * channels` doubles and `out` to
 * `out_len` writable doubles.
 */
enum LmStatus lm_extract_features(const double *window,
                                  size_t frames,
                                  size_t channels,
                                  double *out,
                                  size_t out_len);

/**
 * Per-category precision, recall and F1 from a 6×5 confusion matrix (rows
 * RA, RD, SA, SD, LWp, LWf; columns RA, RD, SA, SD, LW). Each output
 * receives six values in row order; any output may be null.
 *
 * # Safety
 * `counts` must point to 30 values; non-null outputs to 6 writable doubles.
 */
enum LmStatus lm_f1_breakdown(const uint64_t *counts,
                              double *precision,
                              double *recall,
                              double *f1);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum LmStatus lm_lda_load(const char *path, struct LmLda **out);

/**
 * # Safety
 * `model` must come from [`lm_lda_load`] and not be used afterwards.
 */
void lm_lda_free(struct LmLda *model);

/**
 * Feature dimension, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t lm_lda_feature_dim(const struct LmLda *model);

/**
 * Discriminant scores for the five categories; absent categories score
 * negative infinity.
 *
 * # Safety
 * `features` must point to `len` doubles and `scores` to 5 writable doubles.
 */
enum LmStatus lm_lda_scores(const struct LmLda *model,
                            const double *features,
                            size_t len,
                            double *scores);

/**
 * # Safety
 * `features` must point to `len` doubles and `category` be writable.
 */
enum LmStatus lm_lda_predict(const struct LmLda *model,
                             const double *features,
                             size_t len,
                             int32_t *category);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum LmStatus lm_lstm_load(const char *path, struct LmLstm **out);

/**
 * # Safety
 * `model` must come from [`lm_lstm_load`] and not be used afterwards.
 */
void lm_lstm_free(struct LmLstm *model);

/**
 * Input channel count, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t lm_lstm_input_dim(const struct LmLstm *model);

/**
 * Softmax output for one window; `probs` receives one value per output.
 *
 * # Safety
 * `window` must point to `frames * channels` doubles and `probs` to
 * `probs_len` writable doubles.
 */
enum LmStatus lm_lstm_probabilities(const struct LmLstm *model,
                                    const double *window,
                                    size_t frames,
                                    size_t channels,
                                    double *probs,
                                    size_t probs_len);

/**
 * # Safety
 * `window` must point to `frames * channels` doubles and `category` be
 * writable.
 */
enum LmStatus lm_lstm_predict(const struct LmLstm *model,
                              const double *window,
                              size_t frames,
                              size_t channels,
                              int32_t *category);

/**
 * Load and validate a trial CSV.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum LmStatus lm_trial_load(const char *path, struct LmTrial **out);

/**
 * # Safety
 * `trial` must come from [`lm_trial_load`] and not be used afterwards.
 */
void lm_trial_free(struct LmTrial *trial);

/**
 * Frame count, or 0 for a null handle.
 *
 * # Safety
 * `trial` must be null or a live handle.
 */
size_t lm_trial_frames(const struct LmTrial *trial);

/**
 * Copies the channels of `source` as a `frames × channels` row-major block.
 * `out_len` must equal frames times the source's channel count (12 or 36).
 *
 * # Safety
 * `out` must point to `out_len` writable doubles.
 */
enum LmStatus lm_trial_signal(const struct LmTrial *trial,
                              enum LmSource source,
                              double *out,
                              size_t out_len);

/**
 * Per-frame category codes; `out_len` must equal the frame count.
 *
 * # Safety
 * `out` must point to `out_len` writable ints.
 */
enum LmStatus lm_trial_labels(const struct LmTrial *trial, int32_t *out, size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOCOMODE_H */
