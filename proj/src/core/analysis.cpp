#include "expressml/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

#include <json.hpp>

#include "expressml/binary_io.hpp"
#include "expressml/error.hpp"
#include "expressml/parallel.hpp"

namespace expressml {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  const double s = std::chrono::duration<double>(Clock::now() - start).count();
  return std::round(s * 1000.0) / 1000.0;
}

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

std::string percent(double fraction) { return fixed(fraction * 100.0, 2); }

void require_finite(const EvaluationReport& report) {
  if (report.confusion.size() != report.classes() * report.classes() ||
      report.per_class_accuracy.size() != report.classes()) {
    throw Error(ErrorCode::InvalidArgument, "report tables do not match its class count");
  }
  for (std::size_t c = 0; c < report.classes(); ++c) {
    if (!std::isfinite(report.per_class_accuracy[c])) {
      throw Error(ErrorCode::InvalidArgument, "class " + report.class_names[c] + " has no test rows");
    }
  }
  if (!std::isfinite(report.macro_average) || !std::isfinite(report.overall_accuracy)) {
    throw Error(ErrorCode::InvalidArgument, "report averages are not finite");
  }
}

nlohmann::json report_json(const EvaluationReport& report) {
  nlohmann::json confusion = nlohmann::json::array();
  for (std::size_t t = 0; t < report.classes(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < report.classes(); ++p) row.push_back(report.count(t, p));
    confusion.push_back(std::move(row));
  }
  return nlohmann::json{{"class_names", report.class_names},
                        {"confusion", std::move(confusion)},
                        {"feature_count", report.feature_count},
                        {"macro_average", report.macro_average},
                        {"model_family", to_string(report.family)},
                        {"overall_accuracy", report.overall_accuracy},
                        {"per_class_accuracy", report.per_class_accuracy},
                        {"test_rows", report.total()}};
}

std::string timing_flag(unsigned workers) { return workers > 1 ? "parallel" : "serial"; }

}  // namespace

std::uint64_t EvaluationReport::total() const noexcept {
  return std::accumulate(confusion.begin(), confusion.end(), std::uint64_t{0});
}

void finalize_accuracies(EvaluationReport& report) {
  const std::size_t C = report.classes();
  report.per_class_accuracy.assign(C, std::numeric_limits<double>::quiet_NaN());
  std::uint64_t trace = 0;
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t t = 0; t < C; ++t) {
    std::uint64_t row = 0;
    for (std::size_t p = 0; p < C; ++p) row += report.count(t, p);
    trace += report.count(t, t);
    if (row == 0) continue;
    report.per_class_accuracy[t] = static_cast<double>(report.count(t, t)) / static_cast<double>(row);
    sum += report.per_class_accuracy[t];
    ++present;
  }
  const std::uint64_t total = report.total();
  report.macro_average = present ? sum / static_cast<double>(present) : std::numeric_limits<double>::quiet_NaN();
  report.overall_accuracy =
      total ? static_cast<double>(trace) / static_cast<double>(total) : std::numeric_limits<double>::quiet_NaN();
}

EvaluationReport evaluate(const TrainedModel& model, const LabeledMatrix& data, std::span<const std::size_t> rows,
                          unsigned workers) {
  if (data.cols() != model.gene_names().size()) {
    throw Error(ErrorCode::WidthMismatch, "test data has " + std::to_string(data.cols()) + " genes, model expects " +
                                              std::to_string(model.gene_names().size()));
  }
  if (data.gene_names() != model.gene_names()) {
    throw Error(ErrorCode::GeneUniverseMismatch, "test data genes differ from the model's genes");
  }
  const auto& model_classes = model.class_names();
  std::vector<std::uint32_t> to_model(data.classes());
  for (std::size_t c = 0; c < data.classes(); ++c) {
    auto it = std::lower_bound(model_classes.begin(), model_classes.end(), data.class_names()[c]);
    to_model[c] = static_cast<std::uint32_t>(it - model_classes.begin());
  }
  for (std::size_t r : rows) {
    if (r >= data.rows()) throw Error(ErrorCode::InvalidArgument, "test row out of range");
    const std::uint32_t c = to_model[data.label(r)];
    if (c >= model_classes.size() || model_classes[c] != data.class_names()[data.label(r)]) {
      throw Error(ErrorCode::UnknownClassInTest, "test class " + data.class_names()[data.label(r)] +
                                                     " was not seen by the model");
    }
  }

  EvaluationReport report;
  report.family = model.family();
  report.feature_count = data.cols();
  report.class_names = model_classes;
  report.workers = std::max(1u, workers);
  report.confusion.assign(model_classes.size() * model_classes.size(), 0);

  const auto start = Clock::now();
  std::vector<std::uint32_t> predicted(rows.size());
  parallel_for(rows.size(), workers, [&](std::size_t i) { predicted[i] = model.predict(data.row(rows[i])); });
  report.test_seconds = seconds_since(start);

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::uint32_t truth = to_model[data.label(rows[i])];
    ++report.confusion[truth * model_classes.size() + predicted[i]];
  }
  finalize_accuracies(report);
  return report;
}

ImportanceRanking combine_rankings(const ImportanceRanking& rf, const ImportanceRanking& gbm) {
  std::map<std::string, double, std::less<>> gbm_scores;
  for (const auto& [gene, score] : gbm.entries) gbm_scores.emplace(gene, score);
  if (gbm_scores.size() != gbm.entries.size() || rf.entries.size() != gbm.entries.size()) {
    throw Error(ErrorCode::GeneUniverseMismatch, "rankings cover different gene sets");
  }
  std::vector<std::string> names;
  std::vector<double> scores;
  names.reserve(rf.entries.size());
  scores.reserve(rf.entries.size());
  for (const auto& [gene, score] : rf.entries) {
    auto it = gbm_scores.find(gene);
    if (it == gbm_scores.end()) throw Error(ErrorCode::GeneUniverseMismatch, "gene " + gene + " missing from GBM ranking");
    names.push_back(gene);
    scores.push_back((score + it->second) / 2.0);
  }
  return make_ranking(RankingSource::Combined, names, scores);
}

TimedModel train_timed(std::shared_ptr<const LabeledMatrix> data, std::span<const std::size_t> rows,
                       ModelFamily family, const TrainConfig& config, unsigned workers) {
  const auto start = Clock::now();
  TrainedModel model = train_model(std::move(data), rows, family, config, workers);
  return TimedModel{std::move(model), seconds_since(start)};
}

CascadeResult run_cascade(std::shared_ptr<const LabeledMatrix> data, const SplitIndices& split,
                          const CascadeConfig& config, unsigned workers) {
  if (!data) throw Error(ErrorCode::InvalidArgument, "no dataset");
  if (config.schedule.empty()) throw Error(ErrorCode::InvalidArgument, "empty cascade schedule");
  for (std::size_t i = 0; i < config.schedule.size(); ++i) {
    if (config.schedule[i] == 0) throw Error(ErrorCode::InvalidArgument, "cascade sizes must be positive");
    if (i > 0 && config.schedule[i] >= config.schedule[i - 1]) {
      throw Error(ErrorCode::InvalidArgument, "cascade schedule must be strictly decreasing");
    }
  }
  if (config.schedule.front() > data->cols()) {
    throw Error(ErrorCode::ScheduleExceedsGeneCount, "schedule asks for " + std::to_string(config.schedule.front()) +
                                                         " genes but the dataset has " + std::to_string(data->cols()));
  }

  CascadeResult result;
  result.split = split;

  auto train_and_score = [&](std::shared_ptr<const LabeledMatrix> matrix, ModelFamily family) {
    TimedModel timed = train_timed(matrix, split.train_rows, family, config.train, workers);
    EvaluationReport report = evaluate(timed.model, *matrix, split.test_rows, workers);
    report.train_seconds = timed.train_seconds;
    return std::pair{std::move(timed.model), std::move(report)};
  };

  auto [rf_model, rf_report] = train_and_score(data, ModelFamily::RF);
  auto [gbm_model, gbm_report] = train_and_score(data, ModelFamily::GBM);
  result.rf_ranking = *rf_model.importance();
  result.gbm_ranking = *gbm_model.importance();
  result.full_rf = std::move(rf_report);
  result.full_gbm = std::move(gbm_report);
  result.combined = combine_rankings(result.rf_ranking, result.gbm_ranking);

  const std::size_t table = std::min(config.top_table, result.combined.entries.size());
  result.top_genes.assign(result.combined.entries.begin(),
                          result.combined.entries.begin() + static_cast<std::ptrdiff_t>(table));

  for (std::size_t k : config.schedule) {
    CascadeStep step;
    step.k = k;
    step.features = result.combined.top(k);
    std::vector<std::size_t> columns;
    columns.reserve(k);
    for (const auto& gene : step.features) columns.push_back(static_cast<std::size_t>(data->gene_index(gene)));
    auto restricted = std::make_shared<const LabeledMatrix>(data->select_columns(columns));
    for (ModelFamily family : kAllFamilies) step.reports.push_back(train_and_score(restricted, family).second);
    result.steps.push_back(std::move(step));
  }
  return result;
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char ch : value) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

RenderedReport render_report(const EvaluationReport& report) {
  require_finite(report);
  const std::string family = to_string(report.family);
  RenderedReport out;

  out.confusion_csv = "true\\predicted";
  for (const auto& name : report.class_names) out.confusion_csv += "," + csv_field(name);
  out.confusion_csv += '\n';
  for (std::size_t t = 0; t < report.classes(); ++t) {
    out.confusion_csv += csv_field(report.class_names[t]);
    for (std::size_t p = 0; p < report.classes(); ++p) out.confusion_csv += "," + std::to_string(report.count(t, p));
    out.confusion_csv += '\n';
  }

  out.accuracy_csv = "Cancer type," + family + "\n";
  for (std::size_t c = 0; c < report.classes(); ++c) {
    out.accuracy_csv += csv_field(report.class_names[c]) + "," + percent(report.per_class_accuracy[c]) + "\n";
  }
  out.accuracy_csv += "Average," + percent(report.macro_average) + "\n";

  out.json = report_json(report).dump(2) + "\n";

  out.timings_csv = "metric," + family + "\n";
  out.timings_csv += "Average training time (s)," + fixed(report.train_seconds, 3) + "\n";
  out.timings_csv += "Testing time (s)," + fixed(report.test_seconds, 3) + "\n";
  out.timings_csv += "Workers," + std::to_string(report.workers) + "\n";

  std::size_t width = 7;
  for (const auto& name : report.class_names) width = std::max(width, name.size());
  auto pad = [&](std::string s) {
    s.resize(std::max(s.size(), width), ' ');
    return s;
  };
  out.table = pad("Class") + "  " + family + " (%)\n";
  for (std::size_t c = 0; c < report.classes(); ++c) {
    out.table += pad(report.class_names[c]) + "  " + percent(report.per_class_accuracy[c]) + "\n";
  }
  out.table += pad("Average") + "  " + percent(report.macro_average) + "\n";
  out.table += pad("Overall") + "  " + percent(report.overall_accuracy) + "\n";
  out.table += "features " + std::to_string(report.feature_count) + ", test rows " + std::to_string(report.total()) +
               ", train " + fixed(report.train_seconds, 3) + " s, test " + fixed(report.test_seconds, 3) + " s (" +
               timing_flag(report.workers) + ")\n";
  return out;
}

std::string render_ranking_csv(const ImportanceRanking& ranking) {
  std::string out = "rank,gene,score,source\n";
  const std::string source = to_string(ranking.source);
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    out += std::to_string(i + 1) + "," + csv_field(ranking.entries[i].first) + "," +
           nlohmann::json(ranking.entries[i].second).dump() + "," + source + "\n";
  }
  return out;
}

RenderedCascade render_cascade(const CascadeResult& result) {
  require_finite(result.full_rf);
  require_finite(result.full_gbm);
  for (const auto& step : result.steps) {
    for (const auto& report : step.reports) require_finite(report);
  }
  RenderedCascade out;

  out.accuracy_vs_k_csv = "k";
  for (ModelFamily f : kAllFamilies) out.accuracy_vs_k_csv += std::string(",") + to_string(f);
  out.accuracy_vs_k_csv += "\n";
  auto family_row = [&](const std::string& k, auto&& macro_of) {
    out.accuracy_vs_k_csv += k;
    for (ModelFamily f : kAllFamilies) {
      const double v = macro_of(f);
      out.accuracy_vs_k_csv += "," + (std::isnan(v) ? std::string() : percent(v));
    }
    out.accuracy_vs_k_csv += "\n";
  };
  family_row(std::to_string(result.full_rf.feature_count), [&](ModelFamily f) {
    if (f == ModelFamily::RF) return result.full_rf.macro_average;
    if (f == ModelFamily::GBM) return result.full_gbm.macro_average;
    return std::numeric_limits<double>::quiet_NaN();
  });
  for (const auto& step : result.steps) {
    family_row(std::to_string(step.k), [&](ModelFamily f) {
      for (const auto& r : step.reports) {
        if (r.family == f) return r.macro_average;
      }
      return std::numeric_limits<double>::quiet_NaN();
    });
  }

  out.top_genes_csv = "rank,gene,score\n";
  for (std::size_t i = 0; i < result.top_genes.size(); ++i) {
    out.top_genes_csv += std::to_string(i + 1) + "," + csv_field(result.top_genes[i].first) + "," +
                         nlohmann::json(result.top_genes[i].second).dump() + "\n";
  }

  out.ranking_csv = render_ranking_csv(result.combined);

  nlohmann::json steps = nlohmann::json::array();
  for (const auto& step : result.steps) {
    nlohmann::json reports = nlohmann::json::array();
    for (const auto& r : step.reports) reports.push_back(report_json(r));
    steps.push_back({{"features", step.features}, {"k", step.k}, {"reports", std::move(reports)}});
  }
  nlohmann::json top = nlohmann::json::array();
  for (const auto& [gene, score] : result.top_genes) top.push_back({{"gene", gene}, {"score", score}});
  nlohmann::json doc{{"full_gbm", report_json(result.full_gbm)},
                     {"full_rf", report_json(result.full_rf)},
                     {"split", {{"fraction", result.split.fraction},
                                {"seed", result.split.seed},
                                {"test_rows", result.split.test_rows.size()},
                                {"train_rows", result.split.train_rows.size()}}},
                     {"steps", std::move(steps)},
                     {"top_genes", std::move(top)}};
  out.json = doc.dump(2) + "\n";

  out.timings_csv = "k,model,train_seconds,test_seconds,workers\n";
  auto timing_row = [&](std::size_t k, const EvaluationReport& r) {
    out.timings_csv += std::to_string(k) + "," + to_string(r.family) + "," + fixed(r.train_seconds, 3) + "," +
                       fixed(r.test_seconds, 3) + "," + std::to_string(r.workers) + "\n";
  };
  timing_row(result.full_rf.feature_count, result.full_rf);
  timing_row(result.full_gbm.feature_count, result.full_gbm);
  for (const auto& step : result.steps) {
    for (const auto& r : step.reports) timing_row(step.k, r);
  }

  out.table = "k";
  for (ModelFamily f : kAllFamilies) {
    std::string name = to_string(f);
    name.insert(0, 8 - std::min<std::size_t>(8, name.size()), ' ');
    out.table += name;
  }
  out.table += "\n";
  for (const auto& step : result.steps) {
    out.table += std::to_string(step.k);
    for (const auto& r : step.reports) {
      std::string v = percent(r.macro_average);
      v.insert(0, 8 - std::min<std::size_t>(8, v.size()), ' ');
      out.table += v;
    }
    out.table += "\n";
  }
  out.table += "full-feature RF " + percent(result.full_rf.macro_average) + ", GBM " +
               percent(result.full_gbm.macro_average) + "\n";
  out.table += "top genes:";
  for (std::size_t i = 0; i < result.top_genes.size(); ++i) out.table += (i ? ", " : " ") + result.top_genes[i].first;
  out.table += "\n";
  return out;
}

std::vector<std::filesystem::path> write_report(const RenderedReport& rendered, const std::string& prefix) {
  std::vector<std::filesystem::path> paths{prefix + ".confusion.csv", prefix + ".accuracy.csv",
                                           prefix + ".report.json", prefix + ".timings.csv"};
  write_text_file(paths[0], rendered.confusion_csv);
  write_text_file(paths[1], rendered.accuracy_csv);
  write_text_file(paths[2], rendered.json);
  write_text_file(paths[3], rendered.timings_csv);
  return paths;
}

std::vector<std::filesystem::path> write_cascade(const RenderedCascade& rendered, const std::string& prefix) {
  std::vector<std::filesystem::path> paths{prefix + ".accuracy_vs_k.csv", prefix + ".top_genes.csv",
                                           prefix + ".ranking.csv", prefix + ".cascade.json",
                                           prefix + ".timings.csv"};
  write_text_file(paths[0], rendered.accuracy_vs_k_csv);
  write_text_file(paths[1], rendered.top_genes_csv);
  write_text_file(paths[2], rendered.ranking_csv);
  write_text_file(paths[3], rendered.json);
  write_text_file(paths[4], rendered.timings_csv);
  return paths;
}

}  // namespace expressml
