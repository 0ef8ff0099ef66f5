#ifndef ECGSCALO_H
#define ECGSCALO_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Bytes of one 224x224 RGB image.
 */
#define ECG_IMAGE_BYTES ((224 * 224) * 3)

#define ECG_NUM_CLASSES 3

typedef enum EcgProfile {
  ECG_PROFILE_CUSTOM_CNN = 0,
  ECG_PROFILE_ENSEMBLE = 1,
} EcgProfile;

typedef enum EcgStatus {
  ECG_STATUS_OK = 0,
  ECG_STATUS_NULL_POINTER = 1,
  ECG_STATUS_INVALID_ARGUMENT = 2,
  ECG_STATUS_CONFIG = 3,
  ECG_STATUS_DATA = 4,
  ECG_STATUS_IO = 5,
  ECG_STATUS_SHAPE = 6,
  ECG_STATUS_CORRUPT_CHECKPOINT = 7,
  ECG_STATUS_DIGEST_MISMATCH = 8,
  ECG_STATUS_DIVERGENCE = 9,
  ECG_STATUS_BUFFER_TOO_SMALL = 10,
  ECG_STATUS_PANIC = 11,
} EcgStatus;

/**
 * Opaque trained classifier.
 */
typedef struct EcgClassifier EcgClassifier;

/**
 * Opaque recording.
 */
typedef struct EcgSignal EcgSignal;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` writable bytes.
 */
size_t ecg_last_error_message(char *buf, size_t len);

/**
 * Creates a recording from `n` samples at `fs` Hz.
 *
 * # Safety
 * `samples` must be valid for `n` reads; `out` must be a valid pointer.
 */
enum EcgStatus ecg_signal_new(const double *samples, size_t n, double fs, struct EcgSignal **out);

/**
 * # Safety
 * `signal` must be null or a pointer from [`ecg_signal_new`] not yet freed.
 */
void ecg_signal_free(struct EcgSignal *signal);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `signal` must be null or a live handle.
 */
size_t ecg_signal_len(const struct EcgSignal *signal);

/**
 * Sampling rate in Hz, or 0 for a null handle.
 *
 * # Safety
 * `signal` must be null or a live handle.
 */
double ecg_signal_fs(const struct EcgSignal *signal);

/**
 * Copies the samples into `out`, which must hold at least [`ecg_signal_len`] values.
 *
 * # Safety
 * `signal` must be a live handle; `out` must be valid for `cap` writes.
 */
enum EcgStatus ecg_signal_samples(const struct EcgSignal *signal, double *out, size_t cap);

/**
 * Scales the recording in place by its max-abs value.
 *
 * # Safety
 * `signal` must be a live handle.
 */
enum EcgStatus ecg_signal_normalize(struct EcgSignal *signal);

/**
 * Linearly resamples in place to `target_fs` Hz.
 *
 * # Safety
 * `signal` must be a live handle.
 */
enum EcgStatus ecg_signal_resample(struct EcgSignal *signal, double target_fs);

/**
 * Truncates or zero-pads in place to `n` samples.
 *
 * # Safety
 * `signal` must be a live handle.
 */
enum EcgStatus ecg_signal_fix_length(struct EcgSignal *signal, size_t n);

/**
 * Renders the default scalogram (Morlet, 12 voices, jet colormap) into `out` as
 * row-major RGB bytes; `len` must be at least [`ECG_IMAGE_BYTES`].
 *
 * # Safety
 * `signal` must be a live handle; `out` must be valid for `len` writes.
 */
enum EcgStatus ecg_render_scalogram(const struct EcgSignal *signal, uint8_t *out, size_t len);

/**
 * Loads a checkpoint written for `profile`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum EcgStatus ecg_classifier_load(const char *path,
                                   enum EcgProfile profile,
                                   struct EcgClassifier **out);

/**
 * # Safety
 * `classifier` must be null or a pointer from [`ecg_classifier_load`] not yet freed.
 */
void ecg_classifier_free(struct EcgClassifier *classifier);

/**
 * Classifies one image of [`ECG_IMAGE_BYTES`] RGB bytes. Writes the three class
 * probabilities (ARR, NSR, CHF) to `probs` and the argmax class index to `label`.
 *
 * # Safety
 * `classifier` must be a live handle; `rgb` valid for `len` reads; `probs` valid for
 * 3 writes; `label` null or valid.
 */
enum EcgStatus ecg_classifier_predict(struct EcgClassifier *classifier,
                                      const uint8_t *rgb,
                                      size_t len,
                                      double *probs,
                                      uint32_t *label);

/**
 * Soft vote: `probs` holds `models` rows of 3 probabilities; their element-wise mean
 * goes to `out`.
 *
 * # Safety
 * `probs` must be valid for `3 * models` reads and `out` for 3 writes.
 */
enum EcgStatus ecg_ensemble_average(const double *probs, size_t models, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ECGSCALO_H */
