#include "expressml/expressml.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include <json.hpp>

#include "expressml/analysis.hpp"
#include "expressml/binary_io.hpp"
#include "expressml/dataset.hpp"
#include "expressml/error.hpp"
#include "expressml/ingest.hpp"
#include "expressml/model.hpp"

namespace em = expressml;

struct em_dataset {
  std::shared_ptr<const em::LabeledMatrix> matrix;
  mutable std::optional<std::uint64_t> fingerprint;

  std::uint64_t fp() const {
    if (!fingerprint) fingerprint = em::dataset_fingerprint(*matrix);
    return *fingerprint;
  }
};

struct em_split {
  em::SplitIndices indices;
};

struct em_model {
  em::TrainedModel model;
};

struct em_report {
  em::EvaluationReport report;
};

struct em_ranking {
  em::ImportanceRanking ranking;
};

struct em_cascade {
  em::CascadeResult result;
};

namespace {

thread_local std::string last_error;

em_status status_of(em::ErrorCode code) {
  return static_cast<em_status>(static_cast<int>(code) + 1);
}

em_status fail(em_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

template <typename F>
em_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return EM_OK;
  } catch (const em::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(EM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(EM_ERR_INTERNAL, e.what());
  }
}

void require(bool condition, const char* what) {
  if (!condition) throw em::Error(em::ErrorCode::InvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string join_paths(const std::vector<std::filesystem::path>& paths) {
  std::string out;
  for (const auto& p : paths) out += p.string() + "\n";
  return out;
}

em::TrainConfig config_of(const em_train_params& p) {
  em::TrainConfig config;
  config.forest.n_trees = p.rf_trees;
  config.forest.mtry = p.rf_mtry;
  config.forest.max_depth = p.rf_max_depth;
  config.forest.min_leaf = p.rf_min_leaf;
  config.gbm.n_rounds = p.gbm_rounds;
  config.gbm.shrinkage = p.gbm_shrinkage;
  config.gbm.tree_depth = static_cast<int>(p.gbm_depth);
  config.gbm.subsample = p.gbm_subsample;
  config.ferns.n_ferns = p.fern_count;
  config.ferns.depth = p.fern_depth;
  config.linear.lambda = p.svm_lambda;
  config.linear.epochs = p.svm_epochs;
  config.knn.k = p.knn_k;
  config.set_seed(p.seed);
  return config;
}

}  // namespace

extern "C" {

const char* em_last_error(void) { return last_error.c_str(); }

const char* em_status_name(em_status status) {
  if (status == EM_OK) return "Ok";
  if (status == EM_ERR_INTERNAL) return "Internal";
  if (status > EM_OK && status < EM_ERR_INTERNAL) return em::to_string(static_cast<em::ErrorCode>(status - 1));
  return "Unknown";
}

const char* em_version(void) { return "1.0.0"; }

void em_string_free(char* s) { std::free(s); }

em_status em_ingest(const char* expression_path, const char* metadata_path, em_dataset** out,
                    em_ingest_summary* summary, char** summary_json) {
  return guarded([&] {
    require(expression_path && metadata_path && out, "null argument");
    em::IngestResult result = em::ingest_files(expression_path, metadata_path);
    const em::IngestSummary& s = result.summary;
    if (summary) {
      *summary = em_ingest_summary{s.records,       s.genes_observed,           s.genes_retained,
                                   s.dropped_genes.size(), s.dropped_unlabeled_samples, s.duplicate_cells,
                                   s.retained_samples.size()};
    }
    std::string json;
    if (summary_json) {
      json = nlohmann::json{{"dropped_genes", s.dropped_genes},
                            {"dropped_unlabeled_samples", s.dropped_unlabeled_samples},
                            {"duplicate_cells", s.duplicate_cells},
                            {"genes_observed", s.genes_observed},
                            {"genes_retained", s.genes_retained},
                            {"records", s.records},
                            {"retained_samples", s.retained_samples}}
                 .dump(2) + "\n";
    }
    auto handle = std::make_unique<em_dataset>();
    handle->matrix = std::make_shared<const em::LabeledMatrix>(std::move(result.matrix));
    if (summary_json) *summary_json = dup_string(json);
    *out = handle.release();
  });
}

void em_synth_spec_defaults(em_synth_spec* spec) {
  if (!spec) return;
  const em::SynthSpec d;
  *spec = em_synth_spec{d.classes, d.samples_per_class, d.genes, d.informative_genes, d.effect_size, d.noise_sd, d.seed};
}

em_status em_synthesize(const em_synth_spec* spec, em_dataset** out, char** planted_genes) {
  return guarded([&] {
    require(spec && out, "null argument");
    em::SynthSpec s{spec->classes,     spec->samples_per_class, spec->genes, spec->informative_genes,
                    spec->effect_size, spec->noise_sd,          spec->seed};
    em::SyntheticData data = em::generate_synthetic(s);
    std::string planted;
    for (const auto& g : data.planted_genes) planted += g + "\n";
    auto handle = std::make_unique<em_dataset>();
    handle->matrix = std::make_shared<const em::LabeledMatrix>(std::move(data.matrix));
    if (planted_genes) *planted_genes = dup_string(planted);
    *out = handle.release();
  });
}

em_status em_dataset_load(const char* path, em_dataset** out) {
  return guarded([&] {
    require(path && out, "null argument");
    auto handle = std::make_unique<em_dataset>();
    handle->matrix = std::make_shared<const em::LabeledMatrix>(em::load_dataset(path));
    *out = handle.release();
  });
}

em_status em_dataset_save(const em_dataset* dataset, const char* path) {
  return guarded([&] {
    require(dataset && path, "null argument");
    em::save_dataset(*dataset->matrix, path);
  });
}

em_status em_dataset_from_arrays(const float* values, size_t rows, size_t cols, const char* const* gene_names,
                                 const char* const* class_names, size_t classes, const uint32_t* labels,
                                 em_dataset** out) {
  return guarded([&] {
    require(out && (values || rows * cols == 0) && (gene_names || cols == 0) && (class_names || classes == 0) &&
                (labels || rows == 0),
            "null argument");
    std::vector<std::string> genes(gene_names, gene_names + cols);
    std::vector<std::string> names(class_names, class_names + classes);
    auto handle = std::make_unique<em_dataset>();
    handle->matrix = std::make_shared<const em::LabeledMatrix>(
        std::vector<float>(values, values + rows * cols), std::move(genes), std::move(names),
        std::vector<std::uint32_t>(labels, labels + rows));
    *out = handle.release();
  });
}

void em_dataset_free(em_dataset* dataset) { delete dataset; }
size_t em_dataset_rows(const em_dataset* dataset) { return dataset ? dataset->matrix->rows() : 0; }
size_t em_dataset_cols(const em_dataset* dataset) { return dataset ? dataset->matrix->cols() : 0; }
size_t em_dataset_classes(const em_dataset* dataset) { return dataset ? dataset->matrix->classes() : 0; }

const char* em_dataset_gene_name(const em_dataset* dataset, size_t index) {
  if (!dataset || index >= dataset->matrix->cols()) return nullptr;
  return dataset->matrix->gene_names()[index].c_str();
}

const char* em_dataset_class_name(const em_dataset* dataset, size_t index) {
  if (!dataset || index >= dataset->matrix->classes()) return nullptr;
  return dataset->matrix->class_names()[index].c_str();
}

uint64_t em_dataset_fingerprint(const em_dataset* dataset) { return dataset ? dataset->fp() : 0; }

em_status em_split_make(const em_dataset* dataset, double fraction, uint64_t seed, em_split** out) {
  return guarded([&] {
    require(dataset && out, "null argument");
    *out = new em_split{em::stratified_split(*dataset->matrix, fraction, seed)};
  });
}

em_status em_split_save(const em_split* split, const em_dataset* dataset, const char* path) {
  return guarded([&] {
    require(split && dataset && path, "null argument");
    em::save_split(split->indices, dataset->fp(), path);
  });
}

em_status em_split_load(const char* path, const em_dataset* dataset, em_split** out) {
  return guarded([&] {
    require(path && dataset && out, "null argument");
    em::SplitIndices indices = em::load_split(path, dataset->fp());
    for (std::size_t r : indices.train_rows) require(r < dataset->matrix->rows(), "split row out of range");
    for (std::size_t r : indices.test_rows) require(r < dataset->matrix->rows(), "split row out of range");
    *out = new em_split{std::move(indices)};
  });
}

void em_split_free(em_split* split) { delete split; }
size_t em_split_train_count(const em_split* split) { return split ? split->indices.train_rows.size() : 0; }
size_t em_split_test_count(const em_split* split) { return split ? split->indices.test_rows.size() : 0; }
uint64_t em_split_seed(const em_split* split) { return split ? split->indices.seed : 0; }

void em_train_params_defaults(em_train_params* params) {
  if (!params) return;
  const em::TrainConfig d;
  *params = em_train_params{};
  params->seed = 42;
  params->workers = 1;
  params->rf_trees = static_cast<uint32_t>(d.forest.n_trees);
  params->rf_mtry = static_cast<uint32_t>(d.forest.mtry);
  params->rf_max_depth = d.forest.max_depth;
  params->rf_min_leaf = static_cast<uint32_t>(d.forest.min_leaf);
  params->gbm_rounds = static_cast<uint32_t>(d.gbm.n_rounds);
  params->gbm_shrinkage = d.gbm.shrinkage;
  params->gbm_depth = static_cast<uint32_t>(d.gbm.tree_depth);
  params->gbm_subsample = d.gbm.subsample;
  params->fern_count = static_cast<uint32_t>(d.ferns.n_ferns);
  params->fern_depth = static_cast<uint32_t>(d.ferns.depth);
  params->svm_lambda = d.linear.lambda;
  params->svm_epochs = static_cast<uint32_t>(d.linear.epochs);
  params->knn_k = static_cast<uint32_t>(d.knn.k);
}

em_status em_train(const em_dataset* dataset, const em_split* split, const char* family,
                   const em_train_params* params, em_model** out, double* train_seconds) {
  return guarded([&] {
    require(dataset && split && family && out, "null argument");
    const auto parsed = em::parse_family(family);
    if (!parsed) throw em::Error(em::ErrorCode::InvalidParams, std::string("unknown model family ") + family);
    em_train_params p;
    em_train_params_defaults(&p);
    if (params) p = *params;
    em::TimedModel timed =
        em::train_timed(dataset->matrix, split->indices.train_rows, *parsed, config_of(p), p.workers);
    if (train_seconds) *train_seconds = timed.train_seconds;
    *out = new em_model{std::move(timed.model)};
  });
}

em_status em_model_save(const em_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "null argument");
    em::save_model(model->model, path);
  });
}

em_status em_model_load(const char* path, const em_dataset* dataset, em_model** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new em_model{em::load_model(path, dataset ? dataset->matrix : nullptr)};
  });
}

void em_model_free(em_model* model) { delete model; }
const char* em_model_family(const em_model* model) { return model ? em::to_string(model->model.family()) : ""; }
size_t em_model_gene_count(const em_model* model) { return model ? model->model.gene_names().size() : 0; }

em_status em_model_predict(const em_model* model, const float* sample, size_t length, uint32_t* label) {
  return guarded([&] {
    require(model && sample && label, "null argument");
    if (length != model->model.gene_names().size()) {
      throw em::Error(em::ErrorCode::WidthMismatch, "sample has " + std::to_string(length) + " genes, model expects " +
                                                        std::to_string(model->model.gene_names().size()));
    }
    *label = model->model.predict({sample, length});
  });
}

em_status em_evaluate(const em_model* model, const em_dataset* dataset, const em_split* split, uint32_t workers,
                      em_report** out) {
  return guarded([&] {
    require(model && dataset && split && out, "null argument");
    *out = new em_report{em::evaluate(model->model, *dataset->matrix, split->indices.test_rows, workers)};
  });
}

void em_report_free(em_report* report) { delete report; }

void em_report_set_train_seconds(em_report* report, double seconds) {
  if (report && seconds >= 0.0) report->report.train_seconds = seconds;
}

double em_report_macro_average(const em_report* report) {
  return report ? report->report.macro_average : std::numeric_limits<double>::quiet_NaN();
}
double em_report_overall_accuracy(const em_report* report) {
  return report ? report->report.overall_accuracy : std::numeric_limits<double>::quiet_NaN();
}
double em_report_test_seconds(const em_report* report) { return report ? report->report.test_seconds : 0.0; }
double em_report_train_seconds(const em_report* report) { return report ? report->report.train_seconds : 0.0; }

em_status em_report_table(const em_report* report, char** out) {
  return guarded([&] {
    require(report && out, "null argument");
    *out = dup_string(em::render_report(report->report).table);
  });
}

em_status em_report_write(const em_report* report, const char* prefix, char** paths) {
  return guarded([&] {
    require(report && prefix, "null argument");
    const auto written = em::write_report(em::render_report(report->report), prefix);
    if (paths) *paths = dup_string(join_paths(written));
  });
}

em_status em_model_importance(const em_model* model, em_ranking** out) {
  return guarded([&] {
    require(model && out, "null argument");
    auto ranking = model->model.importance();
    if (!ranking) {
      throw em::Error(em::ErrorCode::InvalidArgument,
                      std::string(em::to_string(model->model.family())) + " models carry no importance ranking");
    }
    *out = new em_ranking{std::move(*ranking)};
  });
}

em_status em_combine_rankings(const em_ranking* rf, const em_ranking* gbm, em_ranking** out) {
  return guarded([&] {
    require(rf && gbm && out, "null argument");
    *out = new em_ranking{em::combine_rankings(rf->ranking, gbm->ranking)};
  });
}

void em_ranking_free(em_ranking* ranking) { delete ranking; }
size_t em_ranking_size(const em_ranking* ranking) { return ranking ? ranking->ranking.entries.size() : 0; }

const char* em_ranking_gene(const em_ranking* ranking, size_t index) {
  if (!ranking || index >= ranking->ranking.entries.size()) return nullptr;
  return ranking->ranking.entries[index].first.c_str();
}

double em_ranking_score(const em_ranking* ranking, size_t index) {
  if (!ranking || index >= ranking->ranking.entries.size()) return std::numeric_limits<double>::quiet_NaN();
  return ranking->ranking.entries[index].second;
}

em_status em_ranking_write_csv(const em_ranking* ranking, const char* path) {
  return guarded([&] {
    require(ranking && path, "null argument");
    em::write_text_file(path, em::render_ranking_csv(ranking->ranking));
  });
}

em_status em_cascade_run(const em_dataset* dataset, const em_split* split, const uint64_t* schedule,
                         size_t schedule_length, uint64_t top_table, const em_train_params* params,
                         em_cascade** out) {
  return guarded([&] {
    require(dataset && split && out && (schedule || schedule_length == 0), "null argument");
    em_train_params p;
    em_train_params_defaults(&p);
    if (params) p = *params;
    em::CascadeConfig config;
    config.schedule.assign(schedule, schedule + schedule_length);
    config.train = config_of(p);
    config.top_table = top_table;
    *out = new em_cascade{em::run_cascade(dataset->matrix, split->indices, config, p.workers)};
  });
}

void em_cascade_free(em_cascade* cascade) { delete cascade; }
size_t em_cascade_steps(const em_cascade* cascade) { return cascade ? cascade->result.steps.size() : 0; }

uint64_t em_cascade_step_k(const em_cascade* cascade, size_t step) {
  if (!cascade || step >= cascade->result.steps.size()) return 0;
  return cascade->result.steps[step].k;
}

double em_cascade_step_macro(const em_cascade* cascade, size_t step, const char* family) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (!cascade || !family || step >= cascade->result.steps.size()) return nan;
  const auto parsed = em::parse_family(family);
  if (!parsed) return nan;
  for (const auto& r : cascade->result.steps[step].reports) {
    if (r.family == *parsed) return r.macro_average;
  }
  return nan;
}

em_status em_cascade_table(const em_cascade* cascade, char** out) {
  return guarded([&] {
    require(cascade && out, "null argument");
    *out = dup_string(em::render_cascade(cascade->result).table);
  });
}

em_status em_cascade_write(const em_cascade* cascade, const char* prefix, char** paths) {
  return guarded([&] {
    require(cascade && prefix, "null argument");
    const auto written = em::write_cascade(em::render_cascade(cascade->result), prefix);
    if (paths) *paths = dup_string(join_paths(written));
  });
}

em_status em_file_hash(const char* path, uint64_t* out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = em::fnv1a64(em::read_file(path));
  });
}

}  // extern "C"
