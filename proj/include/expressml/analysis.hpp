#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "expressml/dataset.hpp"
#include "expressml/model.hpp"
#include "expressml/ranking.hpp"

namespace expressml {

struct EvaluationReport {
  ModelFamily family = ModelFamily::RF;
  std::size_t feature_count = 0;
  std::vector<std::string> class_names;
  /// classes x classes, rows = true class, columns = predicted class.
  std::vector<std::uint64_t> confusion;
  std::vector<double> per_class_accuracy;
  double macro_average = 0.0;
  double overall_accuracy = 0.0;
  double train_seconds = 0.0;
  double test_seconds = 0.0;
  unsigned workers = 1;

  std::size_t classes() const noexcept { return class_names.size(); }
  std::uint64_t count(std::size_t truth, std::size_t predicted) const noexcept {
    return confusion[truth * classes() + predicted];
  }
  std::uint64_t total() const noexcept;
};

/// Fills the accuracy fields from `confusion`. Classes without test rows get
/// NaN accuracy; the macro average is the mean over the remaining classes.
void finalize_accuracies(EvaluationReport& report);

/// Predicts every test row and tallies the confusion matrix. Test labels are
/// matched to the model's classes by name.
EvaluationReport evaluate(const TrainedModel& model, const LabeledMatrix& data, std::span<const std::size_t> rows,
                          unsigned workers = 1);

/// Mean of the two normalized scores per gene, renormalized and re-sorted.
ImportanceRanking combine_rankings(const ImportanceRanking& rf, const ImportanceRanking& gbm);

struct TimedModel {
  TrainedModel model;
  double train_seconds;
};

TimedModel train_timed(std::shared_ptr<const LabeledMatrix> data, std::span<const std::size_t> rows,
                       ModelFamily family, const TrainConfig& config, unsigned workers = 1);

struct CascadeConfig {
  std::vector<std::size_t> schedule{80, 60, 40, 20, 10};
  TrainConfig train;
  std::size_t top_table = 20;
};

struct CascadeStep {
  std::size_t k = 0;
  /// Top-k genes in ranking order.
  std::vector<std::string> features;
  /// One report per family, in kAllFamilies order.
  std::vector<EvaluationReport> reports;
};

struct CascadeResult {
  SplitIndices split;
  ImportanceRanking rf_ranking;
  ImportanceRanking gbm_ranking;
  ImportanceRanking combined;
  EvaluationReport full_rf;
  EvaluationReport full_gbm;
  std::vector<CascadeStep> steps;
  /// Head of the combined ranking (the selected-gene table).
  std::vector<std::pair<std::string, double>> top_genes;
};

/// Trains RF and GBM once on all genes, combines their importances, then for
/// each k retrains and evaluates every family on the top-k genes using the
/// same split.
CascadeResult run_cascade(std::shared_ptr<const LabeledMatrix> data, const SplitIndices& split,
                          const CascadeConfig& config, unsigned workers = 1);

struct RenderedReport {
  std::string table;
  std::string confusion_csv;
  std::string accuracy_csv;
  std::string json;
  std::string timings_csv;
};

/// Byte-deterministic rendering. Wall-clock timings appear only in `table`
/// and `timings_csv`. Throws InvalidArgument on NaN accuracies.
RenderedReport render_report(const EvaluationReport& report);

struct RenderedCascade {
  std::string table;
  std::string accuracy_vs_k_csv;
  std::string top_genes_csv;
  std::string ranking_csv;
  std::string json;
  std::string timings_csv;
};

RenderedCascade render_cascade(const CascadeResult& result);

std::string render_ranking_csv(const ImportanceRanking& ranking);

/// Writes <prefix>.confusion.csv, .accuracy.csv, .report.json, .timings.csv;
/// returns the paths written.
std::vector<std::filesystem::path> write_report(const RenderedReport& rendered, const std::string& prefix);
/// Writes <prefix>.accuracy_vs_k.csv, .top_genes.csv, .ranking.csv,
/// .cascade.json, .timings.csv; returns the paths written.
std::vector<std::filesystem::path> write_cascade(const RenderedCascade& rendered, const std::string& prefix);

/// RFC 4180 field quoting.
std::string csv_field(std::string_view value);

}  // namespace expressml
