#include "expressml/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "expressml/error.hpp"
#include "expressml/parallel.hpp"
#include "expressml/rng.hpp"

namespace expressml {

namespace {

// Stream ids for the per-round row subsample; tree growth consumes no
// randomness because every feature is a candidate.
constexpr std::uint64_t kSubsampleStream = 0x5u << 28;

double log_sum_exp(std::span<const double> scores) {
  const double top = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - top);
  return top + std::log(sum);
}

/// Mean multiclass log-loss of row-major scores (n x C).
double mean_log_loss(std::span<const double> scores, std::span<const std::uint32_t> labels, std::size_t classes) {
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = scores.subspan(i * classes, classes);
    total += log_sum_exp(row) - row[labels[i]];
  }
  return total / static_cast<double>(labels.size());
}

void check_width(const GbmModel& model, std::span<const float> sample) {
  if (sample.size() != model.features) {
    throw Error(ErrorCode::WidthMismatch, "sample has " + std::to_string(sample.size()) + " genes, model expects " +
                                              std::to_string(model.features));
  }
}

}  // namespace

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> p(scores.size());
  if (scores.empty()) return p;
  const double top = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    p[c] = std::exp(scores[c] - top);
    sum += p[c];
  }
  for (double& v : p) v /= sum;
  return p;
}

GbmModel train_gbm(const LabeledMatrix& train, std::span<const std::size_t> rows, const GbmParams& params,
                   unsigned workers) {
  if (!(params.shrinkage > 0.0 && params.shrinkage <= 1.0)) {
    throw Error(ErrorCode::InvalidParams, "shrinkage must lie in (0, 1]");
  }
  if (params.tree_depth < 0) throw Error(ErrorCode::InvalidParams, "tree_depth must be >= 0");
  if (!(params.subsample > 0.0 && params.subsample <= 1.0)) {
    throw Error(ErrorCode::InvalidParams, "subsample must lie in (0, 1]");
  }
  if (params.min_leaf < 1) throw Error(ErrorCode::InvalidParams, "min_leaf must be >= 1");
  if (rows.empty()) throw Error(ErrorCode::InvalidParams, "boosting needs training rows");

  const std::size_t classes = train.classes();
  const std::size_t n = rows.size();
  std::vector<std::uint32_t> labels(n);
  std::vector<std::size_t> class_counts(classes, 0);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = train.label(rows[i]);
    ++class_counts[labels[i]];
  }
  if (std::count_if(class_counts.begin(), class_counts.end(), [](std::size_t c) { return c > 0; }) < 2) {
    throw Error(ErrorCode::InvalidParams, "boosting needs at least 2 classes in the training rows");
  }

  GbmModel model;
  model.classes = classes;
  model.features = train.cols();
  model.params = params;
  model.base_scores.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    // A class absent from training gets half a pseudo-count so its score stays finite.
    const double count = class_counts[c] > 0 ? static_cast<double>(class_counts[c]) : 0.5;
    model.base_scores[c] = std::log(count / static_cast<double>(n));
  }

  std::vector<double> scores(n * classes);
  for (std::size_t i = 0; i < n; ++i) std::copy(model.base_scores.begin(), model.base_scores.end(), scores.begin() + i * classes);
  model.initial_loss = mean_log_loss(scores, labels, classes);
  double loss = model.initial_loss;

  std::vector<std::size_t> unique_rows(rows.begin(), rows.end());
  std::sort(unique_rows.begin(), unique_rows.end());
  const bool has_duplicates = std::adjacent_find(unique_rows.begin(), unique_rows.end()) != unique_rows.end();
  std::unique_ptr<SortedColumns> presorted;
  if (!has_duplicates && params.n_rounds > 0) presorted = std::make_unique<SortedColumns>(train, rows);

  const std::size_t subsample_size =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(params.subsample * static_cast<double>(n))));
  std::vector<std::vector<double>> residuals(classes, std::vector<double>(train.rows(), 0.0));
  std::vector<double> candidate(n * classes);
  std::vector<double> step(n * classes);
  const TreeParams tree_params{params.tree_depth, params.min_leaf, 0};

  for (std::size_t round = 0; round < params.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = softmax(std::span<const double>(scores).subspan(i * classes, classes));
      for (std::size_t c = 0; c < classes; ++c) {
        residuals[c][rows[i]] = (labels[i] == c ? 1.0 : 0.0) - p[c];
      }
    }

    std::vector<std::size_t> fit_rows(rows.begin(), rows.end());
    if (subsample_size < n) {
      Rng rng = Rng::stream(params.seed, kSubsampleStream + round);
      rng.shuffle(std::span<std::size_t>(fit_rows));
      fit_rows.resize(subsample_size);
      std::sort(fit_rows.begin(), fit_rows.end());
    }

    std::vector<Tree> trees(classes);
    parallel_for(classes, workers, [&](std::size_t c) {
      Rng unused = Rng::stream(params.seed, round * classes + c);
      trees[c] = grow_tree(train, fit_rows, Targets::regression(residuals[c]), tree_params, unused, presorted.get());
      for (std::size_t i = 0; i < n; ++i) step[i * classes + c] = trees[c].predict_value(train.row(rows[i]));
    });

    for (std::size_t k = 0; k < candidate.size(); ++k) candidate[k] = scores[k] + params.shrinkage * step[k];
    const double next_loss = mean_log_loss(candidate, labels, classes);
    if (!(next_loss < loss)) break;
    scores.swap(candidate);
    loss = next_loss;
    model.rounds.push_back(std::move(trees));
    model.loss_trace.push_back(loss);
  }

  model.importance.assign(model.features, 0.0);
  for (const auto& round : model.rounds) {
    for (const Tree& tree : round) tree.accumulate_importance(model.importance);
  }
  normalize_scores(model.importance);
  return model;
}

std::vector<double> gbm_scores(const GbmModel& model, std::span<const float> sample) {
  check_width(model, sample);
  std::vector<double> scores = model.base_scores;
  for (const auto& round : model.rounds) {
    for (std::size_t c = 0; c < model.classes; ++c) scores[c] += model.params.shrinkage * round[c].predict_value(sample);
  }
  return scores;
}

std::vector<double> predict_gbm_proba(const GbmModel& model, std::span<const float> sample) {
  return softmax(gbm_scores(model, sample));
}

std::uint32_t predict_gbm(const GbmModel& model, std::span<const float> sample) {
  const auto p = predict_gbm_proba(model, sample);
  return static_cast<std::uint32_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

ImportanceRanking gbm_importance(const GbmModel& model, std::span<const std::string> gene_names) {
  return make_ranking(RankingSource::GBM, gene_names, model.importance);
}

void write_gbm(ByteWriter& out, const GbmModel& model) {
  out.u64(model.classes);
  out.u64(model.features);
  out.u64(model.params.n_rounds);
  out.f64(model.params.shrinkage);
  out.i32(model.params.tree_depth);
  out.u64(model.params.seed);
  out.f64(model.params.subsample);
  out.u64(model.params.min_leaf);
  for (double v : model.base_scores) out.f64(v);
  out.f64(model.initial_loss);
  out.u64(model.rounds.size());
  for (double v : model.loss_trace) out.f64(v);
  for (double v : model.importance) out.f64(v);
  for (const auto& round : model.rounds) {
    for (const Tree& tree : round) tree.write(out);
  }
}

GbmModel read_gbm(ByteReader& in) {
  GbmModel model;
  model.classes = in.u64();
  model.features = in.u64();
  model.params.n_rounds = in.u64();
  model.params.shrinkage = in.f64();
  model.params.tree_depth = in.i32();
  model.params.seed = in.u64();
  model.params.subsample = in.f64();
  model.params.min_leaf = in.u64();
  if (model.classes > in.remaining() / 8 || model.features > in.remaining() / 8) {
    throw Error(ErrorCode::TruncatedFile, "boosting payload");
  }
  model.base_scores.resize(model.classes);
  for (double& v : model.base_scores) v = in.f64();
  model.initial_loss = in.f64();
  const std::uint64_t accepted = in.u64();
  if (accepted > in.remaining() / 8) throw Error(ErrorCode::TruncatedFile, "boosting loss trace");
  model.loss_trace.resize(accepted);
  for (double& v : model.loss_trace) v = in.f64();
  model.importance.resize(model.features);
  for (double& v : model.importance) v = in.f64();
  model.rounds.resize(accepted);
  for (auto& round : model.rounds) {
    round.reserve(model.classes);
    for (std::size_t c = 0; c < model.classes; ++c) round.push_back(Tree::read(in));
  }
  return model;
}

}  // namespace expressml
