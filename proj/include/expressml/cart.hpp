#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "expressml/binary_io.hpp"
#include "expressml/dataset.hpp"
#include "expressml/rng.hpp"

namespace expressml {

enum class TreeMode : std::uint8_t { Classification = 0, Regression = 1 };

/// Rows with value <= threshold go left, the rest go right.
struct SplitCandidate {
  std::size_t feature = 0;
  double threshold = 0.0;
  double impurity_decrease = 0.0;
};

/// 1 - sum_c p_c^2. Throws EmptyNode when every count is zero.
double gini_impurity(std::span<const std::uint32_t> class_counts);

/// Per-row training targets, indexed by matrix row.
struct Targets {
  TreeMode mode = TreeMode::Classification;
  std::span<const std::uint32_t> labels;
  std::size_t classes = 0;
  std::span<const double> values;

  static Targets classification(std::span<const std::uint32_t> labels, std::size_t classes) {
    return {TreeMode::Classification, labels, classes, {}};
  }
  static Targets regression(std::span<const double> values) { return {TreeMode::Regression, {}, 0, values}; }
};

struct TreeParams {
  /// Negative means unlimited; 0 yields a single leaf.
  int max_depth = -1;
  std::size_t min_leaf = 1;
  /// Candidate features per node; 0 means every feature.
  std::size_t mtry = 0;
};

/// Each feature's training rows sorted once by value. Lets shallow trees over
/// a fixed row set (boosting) skip the per-node sort on large nodes.
class SortedColumns {
 public:
  struct Entry {
    float value;
    std::uint32_t row;
  };

  /// `rows` must not contain duplicates.
  SortedColumns(const LabeledMatrix& matrix, std::span<const std::size_t> rows);

  std::span<const Entry> column(std::size_t feature) const noexcept {
    return {entries_.data() + feature * universe_, universe_};
  }
  std::size_t universe() const noexcept { return universe_; }

 private:
  std::size_t universe_;
  std::vector<Entry> entries_;
};

/// Exact sort-and-scan split search over `features`. Thresholds are midpoints
/// between consecutive distinct values. The winner maximizes the weighted
/// impurity decrease; ties go to the lower feature index, then the lower
/// threshold. Returns nullopt when no split has a positive decrease.
std::optional<SplitCandidate> best_split(const LabeledMatrix& matrix, std::span<const std::size_t> rows,
                                         std::span<const std::size_t> features, const Targets& targets,
                                         std::size_t min_leaf = 1);

class Tree {
 public:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t leaf = 0;  // payload slot for leaves
    double gain = 0.0;       // node rows x impurity decrease, for importance

    bool is_leaf() const noexcept { return feature < 0; }

    friend bool operator==(const Node&, const Node&) = default;
  };

  Tree() = default;
  Tree(TreeMode mode, std::size_t classes) : mode_(mode), classes_(classes) {}

  TreeMode mode() const noexcept { return mode_; }
  std::size_t classes() const noexcept { return classes_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t leaf_count() const noexcept;
  std::size_t depth() const;

  /// Index into nodes() of the leaf reached by `sample`.
  std::size_t route(std::span<const float> sample) const;
  /// Class-count histogram of the leaf reached by `sample`.
  std::span<const std::uint32_t> predict_histogram(std::span<const float> sample) const;
  /// Majority class of the reached leaf (ties: lower class index).
  std::uint32_t predict_class(std::span<const float> sample) const;
  double predict_value(std::span<const float> sample) const;

  std::span<const std::uint32_t> leaf_histogram(std::size_t node) const;
  double leaf_value(std::size_t node) const;

  /// Adds each internal node's gain to importance[feature].
  void accumulate_importance(std::span<double> importance) const;

  void write(ByteWriter& out) const;
  static Tree read(ByteReader& in);

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  friend class TreeBuilder;

  TreeMode mode_ = TreeMode::Classification;
  std::size_t classes_ = 0;
  std::size_t max_feature_ = 0;  // 1 + largest feature used
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> leaf_counts_;  // classes_ per classification leaf
  std::vector<double> leaf_values_;         // one per regression leaf
};

/// Grows a tree on `rows` (duplicates allowed, e.g. a bootstrap sample). A
/// fresh subset of `mtry` features is drawn from `rng` at every split attempt;
/// no randomness is consumed when mtry covers every feature. `presorted`, when
/// given, must have been built over a duplicate-free superset of `rows`.
Tree grow_tree(const LabeledMatrix& matrix, std::span<const std::size_t> rows, const Targets& targets,
               const TreeParams& params, Rng& rng, const SortedColumns* presorted = nullptr);

}  // namespace expressml
