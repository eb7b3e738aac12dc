#ifndef NAVINSTR_H
#define NAVINSTR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NiStatus {
  NI_STATUS_OK = 0,
  NI_STATUS_NULL_POINTER = 1,
  NI_STATUS_INVALID_UTF8 = 2,
  NI_STATUS_INVALID_INPUT = 3,
  NI_STATUS_NUMERIC = 4,
  NI_STATUS_SCHEMA = 5,
  NI_STATUS_CONFIG = 6,
  NI_STATUS_IO = 7,
  NI_STATUS_PROVIDER = 8,
  NI_STATUS_PANIC = 9,
} NiStatus;

typedef enum NiTurnClass {
  NI_TURN_CLASS_STRAIGHT = 0,
  NI_TURN_CLASS_SLIGHT_RIGHT,
  NI_TURN_CLASS_MODERATE_RIGHT,
  NI_TURN_CLASS_HARD_RIGHT,
  NI_TURN_CLASS_SLIGHT_RIGHT_REAR,
  NI_TURN_CLASS_SHARP_RIGHT_REAR,
  NI_TURN_CLASS_BACKWARD,
  NI_TURN_CLASS_SLIGHT_LEFT,
  NI_TURN_CLASS_MODERATE_LEFT,
  NI_TURN_CLASS_HARD_LEFT,
  NI_TURN_CLASS_SLIGHT_LEFT_REAR,
  NI_TURN_CLASS_SHARP_LEFT_REAR,
} NiTurnClass;

typedef enum NiVerticalClass {
  NI_VERTICAL_CLASS_LEVEL = 0,
  NI_VERTICAL_CLASS_UPWARD,
  NI_VERTICAL_CLASS_DOWNWARD,
} NiVerticalClass;

typedef enum NiRelation {
  NI_RELATION_TOWARDS = 0,
  NI_RELATION_TOWARDS_LEFT_OF,
  NI_RELATION_TOWARDS_RIGHT_OF,
} NiRelation;

typedef enum NiBleuSmoothing {
  NI_BLEU_SMOOTHING_NONE = 0,
  NI_BLEU_SMOOTHING_ADD_ONE,
} NiBleuSmoothing;

/**
 * Opaque handle over the records of a dataset file.
 */
typedef struct NiDataset NiDataset;

/**
 * Opaque, growable list of hypothesis/reference items.
 */
typedef struct NiEvalCorpus NiEvalCorpus;

/**
 * Opaque template library handle.
 */
typedef struct NiTemplateLibrary NiTemplateLibrary;

typedef struct NiLanguageScores {
  double bleu4;
  double meteor;
  double rouge_l;
  double cider;
} NiLanguageScores;

typedef struct NiDatasetStats {
  size_t trajectories;
  size_t instructions;
  size_t sub_pairs;
  size_t entity_pairs;
} NiDatasetStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if the last
 * call succeeded. Valid until the next `ni_` call on the same thread.
 */
const char *ni_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void ni_string_free(char *s);

double ni_normalize_heading(double degrees);

/**
 * # Safety
 * `out` must be null or point to writable memory for one value.
 */
enum NiStatus ni_classify_turn(double turn_angle, enum NiTurnClass *out);

/**
 * # Safety
 * `out` must be null or point to writable memory for one value.
 */
enum NiStatus ni_classify_vertical(double vertical_delta, enum NiVerticalClass *out);

/**
 * Headings of a box's left and right edges on a panorama `pano_width`
 * columns wide whose center column faces `center_heading`.
 *
 * # Safety
 * `out_min` and `out_max` must be null or point to writable doubles.
 */
enum NiStatus ni_bbox_heading_bounds(double x_min,
                                     double x_max,
                                     double pano_width,
                                     double center_heading,
                                     double *out_min,
                                     double *out_max);

/**
 * Token contrastive loss over `n` representations of `dim` values each,
 * stored row by row in `reps`.
 *
 * # Safety
 * `reps` must point to `n * dim` readable doubles; `out` to a writable one.
 */
enum NiStatus ni_contrastive_loss(const double *reps,
                                  size_t n,
                                  size_t dim,
                                  double rho,
                                  double *out);

struct NiTemplateLibrary *ni_template_library_new(void);

/**
 * # Safety
 * `lib` must be a live handle from [`ni_template_library_new`].
 */
size_t ni_template_library_len(const struct NiTemplateLibrary *lib);

/**
 * Template text for one key, with its `{landmark}` slot; free the result
 * with [`ni_string_free`].
 *
 * # Safety
 * `lib` must be a live handle; `out` must point to a writable pointer.
 */
enum NiStatus ni_template_library_get(const struct NiTemplateLibrary *lib,
                                      enum NiTurnClass turn,
                                      enum NiVerticalClass vertical,
                                      enum NiRelation relation,
                                      char **out);

/**
 * # Safety
 * `lib` must be null or a handle not yet freed.
 */
void ni_template_library_free(struct NiTemplateLibrary *lib);

struct NiEvalCorpus *ni_eval_corpus_new(void);

/**
 * Appends one hypothesis with `n_refs` references.
 *
 * # Safety
 * `corpus` must be a live handle; `id` and `hyp` NUL-terminated strings;
 * `refs` must point to `n_refs` NUL-terminated strings.
 */
enum NiStatus ni_eval_corpus_add(struct NiEvalCorpus *corpus,
                                 const char *id,
                                 const char *hyp,
                                 const char *const *refs,
                                 size_t n_refs);

/**
 * # Safety
 * `corpus` must be a live handle.
 */
size_t ni_eval_corpus_len(const struct NiEvalCorpus *corpus);

/**
 * BLEU-4, METEOR, ROUGE-L and CIDEr over the items added so far.
 *
 * # Safety
 * `corpus` must be a live handle; `out` must point to writable memory.
 */
enum NiStatus ni_eval_corpus_score(const struct NiEvalCorpus *corpus,
                                   enum NiBleuSmoothing smoothing,
                                   struct NiLanguageScores *out);

/**
 * # Safety
 * `corpus` must be null or a handle not yet freed.
 */
void ni_eval_corpus_free(struct NiEvalCorpus *corpus);

/**
 * Scores an evaluation JSONL file (language or navigation) and returns the
 * JSON report through `out_json`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_json` a writable pointer.
 */
enum NiStatus ni_evaluate_file(const char *path, enum NiBleuSmoothing smoothing, char **out_json);

/**
 * Runs the generation pipeline from a TOML config. `output` (nullable)
 * overrides the configured output path and `workers` the worker count
 * when non-zero. The JSON run report is returned through `out_json` when
 * it is not null.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `output` null or one.
 */
enum NiStatus ni_generate(const char *config_path,
                          const char *output,
                          size_t workers,
                          bool resume,
                          char **out_json);

/**
 * Reads every record of a dataset file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a writable pointer.
 */
enum NiStatus ni_dataset_open(const char *path, struct NiDataset **out);

/**
 * # Safety
 * `ds` must be a live handle.
 */
size_t ni_dataset_len(const struct NiDataset *ds);

/**
 * # Safety
 * `ds` must be a live handle; `out` must point to writable memory.
 */
enum NiStatus ni_dataset_stats(const struct NiDataset *ds, struct NiDatasetStats *out);

/**
 * Checks every record, against the graph at `graph_path` when it is not
 * null. Writes the violation count to `out_count` and, when
 * `out_json` is not null, the violations as a JSON array.
 *
 * # Safety
 * `ds` must be a live handle; `graph_path` null or a NUL-terminated string.
 */
enum NiStatus ni_dataset_validate(const struct NiDataset *ds,
                                  const char *graph_path,
                                  size_t *out_count,
                                  char **out_json);

/**
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void ni_dataset_free(struct NiDataset *ds);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NAVINSTR_H */
