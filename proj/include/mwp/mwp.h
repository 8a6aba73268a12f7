#ifndef MWP_MWP_H
#define MWP_MWP_H

#include <stddef.h>
#include <stdint.h>

#if defined(MWP_BUILDING_LIBRARY)
#define MWP_API __attribute__((visibility("default")))
#else
#define MWP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every failing call also sets a thread-local message that
   mwp_last_error() returns until the next call on the same thread. */
typedef enum mwp_status {
  MWP_OK = 0,
  MWP_ERR_INVALID_ARGUMENT = 3,
  MWP_ERR_IO = 4,
  MWP_ERR_FORMAT = 5,
  MWP_ERR_EVALUATION = 6,
  MWP_ERR_BACKEND = 7,
  MWP_ERR_CONFIG = 8,
  MWP_ERR_INTERNAL = 9
} mwp_status;

typedef struct mwp_dataset mwp_dataset;
typedef struct mwp_folds mwp_folds;
typedef struct mwp_ruleset mwp_ruleset;

MWP_API const char* mwp_version(void);
MWP_API const char* mwp_last_error(void);
MWP_API const char* mwp_status_name(mwp_status status);

/* Strings returned through char** out-parameters are owned by the caller. */
MWP_API void mwp_string_free(char* s);

/* format: "math23k-json", "math23k-jsonl" or NULL for math23k-json. */
MWP_API mwp_status mwp_dataset_load(const char* path, const char* format, mwp_dataset** out);
MWP_API size_t mwp_dataset_size(const mwp_dataset* dataset);
MWP_API void mwp_dataset_free(mwp_dataset* dataset);

MWP_API mwp_status mwp_folds_split(const mwp_dataset* dataset, int k, uint64_t seed, mwp_folds** out);
MWP_API mwp_status mwp_folds_load(const char* path, mwp_folds** out);
MWP_API mwp_status mwp_folds_to_json(const mwp_folds* folds, char** out_json);
MWP_API int mwp_folds_k(const mwp_folds* folds);
/* Writes min(k, capacity) fold sizes. */
MWP_API mwp_status mwp_folds_sizes(const mwp_folds* folds, size_t* sizes, size_t capacity);
MWP_API void mwp_folds_free(mwp_folds* folds);

MWP_API mwp_status mwp_ruleset_default(mwp_ruleset** out);
MWP_API mwp_status mwp_ruleset_load(const char* path, mwp_ruleset** out);
MWP_API mwp_status mwp_ruleset_to_json(const mwp_ruleset* rules, char** out_json);
MWP_API void mwp_ruleset_free(mwp_ruleset* rules);

/* One routing record: {"id", "track", "matched_rule", "detail"}. */
MWP_API mwp_status mwp_classify_text(const mwp_ruleset* rules, const char* text, char** out_json);
/* One routing record per problem, JSONL, dataset order. */
MWP_API mwp_status mwp_classify_dataset(const mwp_ruleset* rules, const mwp_dataset* dataset, char** out_jsonl);

/* Accepts "x = ..." surface form or a pre-order sequence.
   Result: {"value", "canonical", "approximate", "preorder"}. */
MWP_API mwp_status mwp_evaluate_equation(const char* equation, char** out_json);

/* Unset fields are NULL, 0, or have their has_ flag cleared. */
typedef struct mwp_overrides {
  const char* dataset;
  const char* folds;
  const char* rules;
  const char* out_dir;
  int has_tolerance;
  double tolerance;
  size_t workers;
  int has_seed;
  uint64_t seed;
} mwp_overrides;

typedef struct mwp_run_summary {
  size_t problems;
  size_t tree_routed;
  size_t llm_routed;
  size_t graded;
  size_t correct;
  size_t unsolved;
} mwp_run_summary;

/* Runs the pipeline and writes all output files. summary may be NULL. */
MWP_API mwp_status mwp_pipeline_run(const char* config_path, const mwp_overrides* overrides,
                                    mwp_run_summary* summary);

/* confidences_json: {"M0": 0.239, ...}. problem_ids may be NULL to vote every
   problem in the stores. Output: one voting trace per line. */
MWP_API mwp_status mwp_vote_stores(const char* const* prediction_paths, size_t path_count,
                                   const char* confidences_json, double tolerance, char** out_jsonl);

/* One self-consistency tally per cache entry. marker may be NULL. */
MWP_API mwp_status mwp_sc_cache(const char* cache_dir, const char* marker, double tolerance, char** out_jsonl);

/* Grades results.jsonl against gold answers. out_accuracy gets e.g. "100.0". */
MWP_API mwp_status mwp_evaluate_results(const char* results_path, const char* dataset_path, const char* format,
                                        double tolerance, size_t* out_correct, size_t* out_total,
                                        char** out_accuracy);

/* input_json: {"rows": [{"label": "M0", "accuracy": 23.9}, ...], "ensemble": 26.0}
   ("ensemble" optional). Either output pointer may be NULL. */
MWP_API mwp_status mwp_report(const char* input_json, char** out_text, char** out_json);

/* Seeds the replay cache named by a pipeline config from a generations file. */
MWP_API mwp_status mwp_cache_import(const char* config_path, const char* generations_path, size_t* out_written);

#ifdef __cplusplus
}
#endif

#endif
