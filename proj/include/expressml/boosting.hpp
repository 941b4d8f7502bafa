#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "expressml/cart.hpp"
#include "expressml/dataset.hpp"
#include "expressml/ranking.hpp"

namespace expressml {

struct GbmParams {
  std::size_t n_rounds = 100;
  double shrinkage = 0.1;
  int tree_depth = 3;
  std::uint64_t seed = 42;
  /// Fraction of training rows drawn (without replacement) per round; 1 disables.
  double subsample = 1.0;
  std::size_t min_leaf = 1;

  friend bool operator==(const GbmParams&, const GbmParams&) = default;
};

/// Multiclass gradient boosting with a softmax link: one least-squares
/// regression tree per class per round.
struct GbmModel {
  std::size_t classes = 0;
  std::size_t features = 0;
  GbmParams params;
  /// Log class priors of the training rows.
  std::vector<double> base_scores;
  /// rounds[r][c] is the class-c tree of accepted round r.
  std::vector<std::vector<Tree>> rounds;
  /// Training log-loss after each accepted round.
  std::vector<double> loss_trace;
  /// Training log-loss of the prior-only model.
  double initial_loss = 0.0;
  /// Summed variance reduction per feature, normalized to sum 1.
  std::vector<double> importance;

  friend bool operator==(const GbmModel&, const GbmModel&) = default;
};

/// Each round fits every class's residual y - p and is kept only if it
/// strictly lowers the training log-loss; the first round that does not is
/// discarded and training stops there.
GbmModel train_gbm(const LabeledMatrix& train, std::span<const std::size_t> rows, const GbmParams& params,
                   unsigned workers = 1);

/// Raw additive scores per class (before softmax).
std::vector<double> gbm_scores(const GbmModel& model, std::span<const float> sample);

/// Softmax of the scores, computed with the max subtracted.
std::vector<double> softmax(std::span<const double> scores);

std::vector<double> predict_gbm_proba(const GbmModel& model, std::span<const float> sample);

/// argmax of the probabilities; ties go to the lower class index.
std::uint32_t predict_gbm(const GbmModel& model, std::span<const float> sample);

ImportanceRanking gbm_importance(const GbmModel& model, std::span<const std::string> gene_names);

void write_gbm(ByteWriter& out, const GbmModel& model);
GbmModel read_gbm(ByteReader& in);

}  // namespace expressml
