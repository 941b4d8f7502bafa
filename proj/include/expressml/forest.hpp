#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "expressml/cart.hpp"
#include "expressml/dataset.hpp"
#include "expressml/ranking.hpp"

namespace expressml {

struct ForestParams {
  std::size_t n_trees = 500;
  /// 0 selects floor(sqrt(m)).
  std::size_t mtry = 0;
  std::uint64_t seed = 42;
  bool bootstrap = true;
  int max_depth = -1;
  std::size_t min_leaf = 1;

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

struct ForestModel {
  std::vector<Tree> trees;
  std::size_t classes = 0;
  std::size_t features = 0;
  /// As trained; mtry is resolved to a concrete value.
  ForestParams params;
  /// Mean decrease in impurity per feature, normalized to sum 1.
  std::vector<double> importance;

  friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

struct ForestVote {
  std::uint32_t label = 0;
  std::vector<std::uint32_t> histogram;
};

/// Tree t is grown on a bootstrap resample drawn from Rng::stream(seed, t),
/// so the model does not depend on how many workers grew it.
ForestModel train_forest(const LabeledMatrix& train, std::span<const std::size_t> rows, const ForestParams& params,
                         unsigned workers = 1);

/// Majority vote over tree leaf-majority classes; ties go to the lower index.
ForestVote predict_forest(const ForestModel& model, std::span<const float> sample);

ImportanceRanking forest_importance(const ForestModel& model, std::span<const std::string> gene_names);

void write_forest(ByteWriter& out, const ForestModel& model);
ForestModel read_forest(ByteReader& in);

}  // namespace expressml
