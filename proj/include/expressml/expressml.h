/* C interface to the expressml library.
 *
 * Objects are opaque handles created by the library and released with their
 * matching *_free function. Every fallible call returns an em_status; on
 * failure em_last_error() describes the problem for the calling thread.
 * Strings returned through char** must be released with em_string_free.
 */
#ifndef EXPRESSML_H
#define EXPRESSML_H

#include <stddef.h>
#include <stdint.h>

#if defined(EXPRESSML_BUILDING)
#define EM_API __attribute__((visibility("default")))
#else
#define EM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum em_status {
  EM_OK = 0,
  EM_ERR_INVALID_ARGUMENT,
  EM_ERR_IO,
  EM_ERR_MALFORMED_ROW,
  EM_ERR_NON_NUMERIC_SCORE,
  EM_ERR_DUPLICATE_SAMPLE,
  EM_ERR_DUPLICATE_CELL,
  EM_ERR_EMPTY_RESULT,
  EM_ERR_CLASS_TOO_SMALL,
  EM_ERR_BAD_MAGIC,
  EM_ERR_VERSION_MISMATCH,
  EM_ERR_TRUNCATED_FILE,
  EM_ERR_CHECKSUM_MISMATCH,
  EM_ERR_INVALID_SPEC,
  EM_ERR_INVALID_PARAMS,
  EM_ERR_EMPTY_NODE,
  EM_ERR_FEATURE_OUT_OF_RANGE,
  EM_ERR_WIDTH_MISMATCH,
  EM_ERR_LENGTH_MISMATCH,
  EM_ERR_UNKNOWN_CLASS_IN_TEST,
  EM_ERR_GENE_UNIVERSE_MISMATCH,
  EM_ERR_SCHEDULE_EXCEEDS_GENE_COUNT,
  EM_ERR_DATASET_MISMATCH,
  EM_ERR_INTERNAL
} em_status;

typedef struct em_dataset em_dataset;
typedef struct em_split em_split;
typedef struct em_model em_model;
typedef struct em_report em_report;
typedef struct em_ranking em_ranking;
typedef struct em_cascade em_cascade;

/* Message for the last failure on this thread; never NULL. */
EM_API const char* em_last_error(void);
EM_API const char* em_status_name(em_status status);
EM_API const char* em_version(void);
EM_API void em_string_free(char* s);

/* ---- datasets ---- */

typedef struct em_ingest_summary {
  uint64_t records;
  uint64_t genes_observed;
  uint64_t genes_retained;
  uint64_t dropped_genes;
  uint64_t dropped_unlabeled_samples;
  uint64_t duplicate_cells;
  uint64_t retained_samples;
} em_ingest_summary;

/* Long-format expression TSV (plain or gzip) + sample metadata TSV.
 * summary_json (optional) also lists dropped genes and retained sample ids. */
EM_API em_status em_ingest(const char* expression_path, const char* metadata_path, em_dataset** out,
                           em_ingest_summary* summary, char** summary_json);

typedef struct em_synth_spec {
  uint64_t classes;
  uint64_t samples_per_class;
  uint64_t genes;
  uint64_t informative_genes;
  double effect_size;
  double noise_sd;
  uint64_t seed;
} em_synth_spec;

EM_API void em_synth_spec_defaults(em_synth_spec* spec);
/* planted_genes (optional) receives the planted gene names, one per line. */
EM_API em_status em_synthesize(const em_synth_spec* spec, em_dataset** out, char** planted_genes);

EM_API em_status em_dataset_load(const char* path, em_dataset** out);
EM_API em_status em_dataset_save(const em_dataset* dataset, const char* path);
/* Builds a dataset from a row-major rows x cols float buffer. gene_names must
 * be sorted and unique; class_names sorted; labels index class_names. */
EM_API em_status em_dataset_from_arrays(const float* values, size_t rows, size_t cols, const char* const* gene_names,
                                        const char* const* class_names, size_t classes, const uint32_t* labels,
                                        em_dataset** out);
EM_API void em_dataset_free(em_dataset* dataset);
EM_API size_t em_dataset_rows(const em_dataset* dataset);
EM_API size_t em_dataset_cols(const em_dataset* dataset);
EM_API size_t em_dataset_classes(const em_dataset* dataset);
EM_API const char* em_dataset_gene_name(const em_dataset* dataset, size_t index);
EM_API const char* em_dataset_class_name(const em_dataset* dataset, size_t index);
EM_API uint64_t em_dataset_fingerprint(const em_dataset* dataset);

/* ---- splits ---- */

EM_API em_status em_split_make(const em_dataset* dataset, double fraction, uint64_t seed, em_split** out);
EM_API em_status em_split_save(const em_split* split, const em_dataset* dataset, const char* path);
EM_API em_status em_split_load(const char* path, const em_dataset* dataset, em_split** out);
EM_API void em_split_free(em_split* split);
EM_API size_t em_split_train_count(const em_split* split);
EM_API size_t em_split_test_count(const em_split* split);
EM_API uint64_t em_split_seed(const em_split* split);

/* ---- models ---- */

typedef struct em_train_params {
  uint64_t seed;
  uint32_t workers;
  uint32_t rf_trees;
  uint32_t rf_mtry; /* 0 selects floor(sqrt(genes)) */
  int32_t rf_max_depth; /* -1 is unlimited */
  uint32_t rf_min_leaf;
  uint32_t gbm_rounds;
  double gbm_shrinkage;
  uint32_t gbm_depth;
  double gbm_subsample;
  uint32_t fern_count;
  uint32_t fern_depth;
  double svm_lambda;
  uint32_t svm_epochs;
  uint32_t knn_k;
} em_train_params;

EM_API void em_train_params_defaults(em_train_params* params);

/* family: "rf", "gbm", "rfern", "svm" or "knn" (any case). */
EM_API em_status em_train(const em_dataset* dataset, const em_split* split, const char* family,
                          const em_train_params* params, em_model** out, double* train_seconds);
EM_API em_status em_model_save(const em_model* model, const char* path);
/* KNN models need the dataset they were trained on; others accept NULL. */
EM_API em_status em_model_load(const char* path, const em_dataset* dataset, em_model** out);
EM_API void em_model_free(em_model* model);
EM_API const char* em_model_family(const em_model* model);
EM_API size_t em_model_gene_count(const em_model* model);
EM_API em_status em_model_predict(const em_model* model, const float* sample, size_t length, uint32_t* label);

/* ---- evaluation ---- */

EM_API em_status em_evaluate(const em_model* model, const em_dataset* dataset, const em_split* split, uint32_t workers,
                             em_report** out);
EM_API void em_report_free(em_report* report);
EM_API void em_report_set_train_seconds(em_report* report, double seconds);
EM_API double em_report_macro_average(const em_report* report);
EM_API double em_report_overall_accuracy(const em_report* report);
EM_API double em_report_test_seconds(const em_report* report);
EM_API double em_report_train_seconds(const em_report* report);
EM_API em_status em_report_table(const em_report* report, char** out);
/* Writes the report files under prefix; paths (optional) lists them, one per line. */
EM_API em_status em_report_write(const em_report* report, const char* prefix, char** paths);

/* ---- rankings ---- */

EM_API em_status em_model_importance(const em_model* model, em_ranking** out);
EM_API em_status em_combine_rankings(const em_ranking* rf, const em_ranking* gbm, em_ranking** out);
EM_API void em_ranking_free(em_ranking* ranking);
EM_API size_t em_ranking_size(const em_ranking* ranking);
EM_API const char* em_ranking_gene(const em_ranking* ranking, size_t index);
EM_API double em_ranking_score(const em_ranking* ranking, size_t index);
EM_API em_status em_ranking_write_csv(const em_ranking* ranking, const char* path);

/* ---- cascade ---- */

EM_API em_status em_cascade_run(const em_dataset* dataset, const em_split* split, const uint64_t* schedule,
                                size_t schedule_length, uint64_t top_table, const em_train_params* params,
                                em_cascade** out);
EM_API void em_cascade_free(em_cascade* cascade);
EM_API size_t em_cascade_steps(const em_cascade* cascade);
EM_API uint64_t em_cascade_step_k(const em_cascade* cascade, size_t step);
/* Macro accuracy of family at a step; NaN when unknown. */
EM_API double em_cascade_step_macro(const em_cascade* cascade, size_t step, const char* family);
EM_API em_status em_cascade_table(const em_cascade* cascade, char** out);
EM_API em_status em_cascade_write(const em_cascade* cascade, const char* prefix, char** paths);

/* ---- utilities ---- */

/* FNV-1a 64 of a file's bytes. */
EM_API em_status em_file_hash(const char* path, uint64_t* out);

#ifdef __cplusplus
}
#endif

#endif
