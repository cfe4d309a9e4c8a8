/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef LATENTFACTOR_H
#define LATENTFACTOR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum LfStatus {
  LF_STATUS_OK = 0,
  // A required pointer argument was NULL.
  LF_STATUS_NULL_POINTER = 1,
  // Invalid argument or configuration.
  LF_STATUS_INVALID_ARGUMENT = 2,
  // Missing, unreadable or corrupt file.
  LF_STATUS_FILE = 3,
  // Non-finite values or a degenerate model.
  LF_STATUS_NUMERIC = 4,
  // Shape, index or layout mismatch.
  LF_STATUS_INVARIANT = 5,
  // An output buffer is shorter than the result.
  LF_STATUS_BUFFER_TOO_SMALL = 6,
  // Internal error; the library state is unchanged.
  LF_STATUS_PANIC = 7,
} LfStatus;

typedef enum LfParamForm {
  LF_PARAM_FORM_RANK_ONE = 0,
  LF_PARAM_FORM_FULL_RANK = 1,
} LfParamForm;

typedef enum LfDirectionKind {
  LF_DIRECTION_KIND_EXPRESSION = 0,
  LF_DIRECTION_KIND_ROTATION = 1,
} LfDirectionKind;

// Opaque latent dataset.
typedef struct LfDataset LfDataset;

// Opaque semantic edit direction.
typedef struct LfDirection LfDirection;

// Opaque fitted tensor model.
typedef struct LfModel LfModel;

// Recovery settings; fill with `lf_recovery_config_default`.
typedef struct LfRecoveryConfig {
  // Tikhonov weights for the person, expression, intensity and rotation parameters.
  double lambda1[4];
  // Sum-to-one weights, same order.
  double lambda2[4];
  size_t max_iters;
  double learning_rate;
  double tolerance;
  size_t closed_form_max_params;
} LfRecoveryConfig;

// Outcome of one recovery.
typedef struct LfRecoveryResult {
  // `‖ŵ − w‖²`.
  double final_loss;
  // Loss plus regularization (rank one) or the loss (full rank).
  double objective;
  size_t iterations_used;
  bool converged;
} LfRecoveryResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *lf_version(void);

// Message of the last failed call on this thread, or NULL if none failed.
// Valid until the next failing call on the same thread.
const char *lf_last_error_message(void);

// Draws a synthetic dataset. `dims` is `{D, P, E, I, R}`.
//
// # Safety
// `dims` must point to 5 values and `out` to writable storage.
enum LfStatus lf_dataset_synthetic(const size_t *dims,
                                   uint64_t seed,
                                   double noise_sigma,
                                   struct LfDataset **out);

// Reads a dataset container.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum LfStatus lf_dataset_read(const char *path, struct LfDataset **out);

// Writes a dataset container (32-bit values).
//
// # Safety
// `ds` must be a live handle and `path` a NUL-terminated string.
enum LfStatus lf_dataset_write(const struct LfDataset *ds, const char *path);

// Writes `{D, P, E, I, R}` to `out_dims`.
//
// # Safety
// `ds` must be a live handle; `out_dims` must hold 5 values.
enum LfStatus lf_dataset_dims(const struct LfDataset *ds, size_t *out_dims);

// Copies the latent of grid cell `{p, e, i, r}` into `out`.
//
// # Safety
// `cell` must hold 4 values and `out` `out_len` values.
enum LfStatus lf_dataset_latent(const struct LfDataset *ds,
                                const size_t *cell,
                                double *out,
                                size_t out_len);

// Releases a dataset. NULL is ignored.
//
// # Safety
// `ds` must be NULL or a handle not yet freed.
void lf_dataset_free(struct LfDataset *ds);

// Fits a model to a dataset.
//
// # Safety
// `ds` must be a live handle and `out` writable.
enum LfStatus lf_model_fit(const struct LfDataset *ds, struct LfModel **out);

// Reads a model container.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum LfStatus lf_model_read(const char *path, struct LfModel **out);

// Writes a model container at full precision.
//
// # Safety
// `m` must be a live handle and `path` a NUL-terminated string.
enum LfStatus lf_model_write(const struct LfModel *m, const char *path);

// # Safety
// `m` must be a live handle and `out` writable.
enum LfStatus lf_model_latent_dim(const struct LfModel *m, size_t *out);

// Writes `{P, E, I, R}` to `out_sizes`.
//
// # Safety
// `m` must be a live handle; `out_sizes` must hold 4 values.
enum LfStatus lf_model_axis_sizes(const struct LfModel *m, size_t *out_sizes);

// Reconstructs the latent of in-sample cell `{p, e, i, r}`.
//
// # Safety
// `cell` must hold 4 values and `out` `out_len` values.
enum LfStatus lf_model_reconstruct_cell(const struct LfModel *m,
                                        const size_t *cell,
                                        double *out,
                                        size_t out_len);

// Releases a model. NULL is ignored.
//
// # Safety
// `m` must be NULL or a handle not yet freed.
void lf_model_free(struct LfModel *m);

// Fills `out` with the default recovery settings.
//
// # Safety
// `out` must be writable.
enum LfStatus lf_recovery_config_default(struct LfRecoveryConfig *out);

// Recovers model parameters for latent `w`. `config` may be NULL for the
// defaults. When `reconstruction` is not NULL the reconstructed latent is
// written there.
//
// # Safety
// `w` must hold `w_len` values, `reconstruction` (if not NULL)
// `reconstruction_len` values, and `out` must be writable.
enum LfStatus lf_recover(const struct LfModel *m,
                         const double *w,
                         size_t w_len,
                         enum LfParamForm form,
                         const struct LfRecoveryConfig *config,
                         double *reconstruction,
                         size_t reconstruction_len,
                         struct LfRecoveryResult *out);

// Number of directions a model yields: one per expression, plus yaw when
// the model has two rotations.
//
// # Safety
// `m` must be a live handle and `out` writable.
enum LfStatus lf_model_direction_count(const struct LfModel *m, size_t *out);

// Extracts direction `index` (expressions in label order, then yaw).
//
// # Safety
// `m` must be a live handle and `out` writable.
enum LfStatus lf_model_direction(const struct LfModel *m, size_t index, struct LfDirection **out);

// Reads a direction container.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum LfStatus lf_direction_read(const char *path, struct LfDirection **out);

// Writes a direction container at full precision.
//
// # Safety
// `d` must be a live handle and `path` a NUL-terminated string.
enum LfStatus lf_direction_write(const struct LfDirection *d, const char *path);

// The direction's name, owned by the handle. NULL for a NULL handle.
//
// # Safety
// `d` must be NULL or a live handle.
const char *lf_direction_name(const struct LfDirection *d);

// # Safety
// `d` must be a live handle and `out` writable.
enum LfStatus lf_direction_kind(const struct LfDirection *d, enum LfDirectionKind *out);

// # Safety
// `d` must be a live handle and `out` writable.
enum LfStatus lf_direction_dim(const struct LfDirection *d, size_t *out);

// Copies the direction vector into `out`.
//
// # Safety
// `out` must hold `out_len` values.
enum LfStatus lf_direction_vector(const struct LfDirection *d, double *out, size_t out_len);

// Writes `w + strength·n` to `out`. `out` may alias `w`.
//
// # Safety
// `w` must hold `w_len` values and `out` `out_len` values.
enum LfStatus lf_edit(const struct LfDirection *d,
                      const double *w,
                      size_t w_len,
                      double strength,
                      double *out,
                      size_t out_len);

// Releases a direction. NULL is ignored.
//
// # Safety
// `d` must be NULL or a handle not yet freed.
void lf_direction_free(struct LfDirection *d);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LATENTFACTOR_H */
