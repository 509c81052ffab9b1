#ifndef CURATOR_H
#define CURATOR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CuratorStatus {
  CURATOR_STATUS_OK = 0,
  CURATOR_STATUS_NULL_POINTER = 1,
  CURATOR_STATUS_INVALID_UTF8 = 2,
  CURATOR_STATUS_IO = 3,
  CURATOR_STATUS_INVALID_INPUT = 4,
  CURATOR_STATUS_BUFFER_TOO_SMALL = 5,
  CURATOR_STATUS_PROVIDER = 6,
  CURATOR_STATUS_PANIC = 7,
} CuratorStatus;

/*
 Opaque classifier handle.
 */
typedef struct CuratorModel CuratorModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL. Valid until
 the next failing call on the same thread.
 */
const char *curator_last_error_message(void);

/*
 Releases a string returned by this library. NULL is ignored.

 # Safety
 `s` must come from this library and not have been freed already.
 */
void curator_string_free(char *s);

/*
 Library version as a static NUL-terminated string.
 */
const char *curator_version(void);

/*
 Writes the normalized form of `text` to `*out`.

 # Safety
 `text` must be a NUL-terminated string; `out` must be writable.
 */
enum CuratorStatus curator_normalize_text(const char *text, char **out);

/*
 Loads a model file written by the trainer.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CuratorStatus curator_model_load(const char *path, struct CuratorModel **out);

/*
 Frees a model handle. NULL is ignored.

 # Safety
 `model` must come from `curator_model_load` and not be used afterwards.
 */
void curator_model_free(struct CuratorModel *model);

/*
 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum CuratorStatus curator_model_num_labels(const struct CuratorModel *model, size_t *out);

/*
 Writes a copy of label `index` to `*out`; free it with `curator_string_free`.

 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum CuratorStatus curator_model_label(const struct CuratorModel *model, size_t index, char **out);

/*
 Predicts the class of `text`. When `probabilities` is non-NULL it must
 hold at least `capacity` doubles and receives one probability per label.

 # Safety
 `model` must be a live handle, `text` NUL-terminated, `class_index`
 writable and `probabilities` valid for `capacity` writes when non-NULL.
 */
enum CuratorStatus curator_model_predict(const struct CuratorModel *model,
                                         const char *text,
                                         size_t *class_index,
                                         double *probabilities,
                                         size_t capacity);

/*
 Scores the model on a JSONL record file.

 # Safety
 `model` must be a live handle, `data_path` NUL-terminated, and the
 output pointers writable.
 */
enum CuratorStatus curator_model_evaluate(const struct CuratorModel *model,
                                          const char *data_path,
                                          double *accuracy,
                                          double *macro_f1);

/*
 Runs a curation job from a TOML config, as `curator run` does, and
 returns its exit code (0 ok, 1 config, 2 provider, 3 initialization).
 `out_dir` may be NULL; the seed is used only when `has_seed` is true.

 # Safety
 `config_path` and a non-NULL `out_dir` must be NUL-terminated strings.
 */
int32_t curator_run(const char *config_path, const char *out_dir, bool has_seed, uint64_t seed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CURATOR_H */
