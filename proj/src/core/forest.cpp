#include "expressml/forest.hpp"

#include <algorithm>
#include <cmath>

#include "expressml/error.hpp"
#include "expressml/parallel.hpp"
#include "expressml/rng.hpp"

namespace expressml {

ForestModel train_forest(const LabeledMatrix& train, std::span<const std::size_t> rows, const ForestParams& params,
                         unsigned workers) {
  const std::size_t m = train.cols();
  if (rows.empty()) throw Error(ErrorCode::InvalidParams, "forest needs at least one training row");
  if (params.n_trees < 1) throw Error(ErrorCode::InvalidParams, "n_trees must be >= 1");
  if (m == 0) throw Error(ErrorCode::InvalidParams, "forest needs at least one feature");
  if (params.mtry > m) throw Error(ErrorCode::InvalidParams, "mtry exceeds the number of features");
  if (params.min_leaf < 1) throw Error(ErrorCode::InvalidParams, "min_leaf must be >= 1");

  ForestModel model;
  model.classes = train.classes();
  model.features = m;
  model.params = params;
  if (model.params.mtry == 0) {
    model.params.mtry = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(m)))));
  }

  const Targets targets = Targets::classification(train.row_class(), train.classes());
  const TreeParams tree_params{params.max_depth, params.min_leaf, model.params.mtry};
  model.trees.resize(params.n_trees);
  parallel_for(params.n_trees, workers, [&](std::size_t t) {
    Rng rng = Rng::stream(params.seed, t);
    std::vector<std::size_t> sample;
    if (params.bootstrap) {
      sample.resize(rows.size());
      for (auto& r : sample) r = rows[static_cast<std::size_t>(rng.below(rows.size()))];
    } else {
      sample.assign(rows.begin(), rows.end());
    }
    model.trees[t] = grow_tree(train, sample, targets, tree_params, rng);
  });

  model.importance.assign(m, 0.0);
  for (const Tree& tree : model.trees) tree.accumulate_importance(model.importance);
  normalize_scores(model.importance);
  return model;
}

ForestVote predict_forest(const ForestModel& model, std::span<const float> sample) {
  if (sample.size() != model.features) {
    throw Error(ErrorCode::WidthMismatch, "sample has " + std::to_string(sample.size()) + " genes, model expects " +
                                              std::to_string(model.features));
  }
  ForestVote vote;
  vote.histogram.assign(model.classes, 0);
  for (const Tree& tree : model.trees) ++vote.histogram[tree.predict_class(sample)];
  vote.label = static_cast<std::uint32_t>(std::max_element(vote.histogram.begin(), vote.histogram.end()) -
                                          vote.histogram.begin());
  return vote;
}

ImportanceRanking forest_importance(const ForestModel& model, std::span<const std::string> gene_names) {
  return make_ranking(RankingSource::RF, gene_names, model.importance);
}

void write_forest(ByteWriter& out, const ForestModel& model) {
  out.u64(model.classes);
  out.u64(model.features);
  out.u64(model.params.n_trees);
  out.u64(model.params.mtry);
  out.u64(model.params.seed);
  out.u8(model.params.bootstrap ? 1 : 0);
  out.i32(model.params.max_depth);
  out.u64(model.params.min_leaf);
  for (double v : model.importance) out.f64(v);
  for (const Tree& tree : model.trees) tree.write(out);
}

ForestModel read_forest(ByteReader& in) {
  ForestModel model;
  model.classes = in.u64();
  model.features = in.u64();
  model.params.n_trees = in.u64();
  model.params.mtry = in.u64();
  model.params.seed = in.u64();
  model.params.bootstrap = in.u8() != 0;
  model.params.max_depth = in.i32();
  model.params.min_leaf = in.u64();
  if (model.features > in.remaining() / 8 || model.params.n_trees > in.remaining()) {
    throw Error(ErrorCode::TruncatedFile, "forest payload");
  }
  model.importance.resize(model.features);
  for (double& v : model.importance) v = in.f64();
  model.trees.reserve(model.params.n_trees);
  for (std::size_t t = 0; t < model.params.n_trees; ++t) {
    model.trees.push_back(Tree::read(in));
    if (model.trees.back().classes() != model.classes) {
      throw Error(ErrorCode::InvalidArgument, "forest tree class count mismatch");
    }
  }
  return model;
}

}  // namespace expressml
