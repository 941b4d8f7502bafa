#include "expressml/cart.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "expressml/error.hpp"

namespace expressml {

namespace {

// Relative slack for "positive decrease" and for treating two decreases as tied.
constexpr double kRelativeTolerance = 1e-10;

using Entry = SortedColumns::Entry;

bool entry_less(const Entry& a, const Entry& b) noexcept {
  return a.value < b.value || (a.value == b.value && a.row < b.row);
}

struct NodeStats {
  std::size_t n = 0;
  std::vector<std::uint32_t> counts;  // classification
  std::uint64_t sum_sq_counts = 0;
  double sum = 0.0;  // regression
  double impurity = 0.0;
};

NodeStats node_stats(std::span<const std::size_t> rows, const Targets& targets) {
  NodeStats s;
  s.n = rows.size();
  if (targets.mode == TreeMode::Classification) {
    s.counts.assign(targets.classes, 0);
    for (std::size_t r : rows) ++s.counts[targets.labels[r]];
    for (std::uint32_t c : s.counts) s.sum_sq_counts += static_cast<std::uint64_t>(c) * c;
    const double n = static_cast<double>(s.n);
    s.impurity = 1.0 - static_cast<double>(s.sum_sq_counts) / (n * n);
  } else {
    for (std::size_t r : rows) s.sum += targets.values[r];
    const double mean = s.sum / static_cast<double>(s.n);
    double ss = 0.0;
    for (std::size_t r : rows) ss += (targets.values[r] - mean) * (targets.values[r] - mean);
    s.impurity = ss / static_cast<double>(s.n);
  }
  return s;
}

/// Scans one feature's sorted node entries and updates `best`.
class SplitSweeper {
 public:
  SplitSweeper(const Targets& targets, const NodeStats& parent, std::size_t min_leaf)
      : targets_(targets), parent_(parent), min_leaf_(std::max<std::size_t>(min_leaf, 1)) {
    left_.resize(targets.classes);
    right_.resize(targets.classes);
  }

  /// `sorted` may hold rows outside the node; `keep` selects the node's rows.
  template <typename Keep>
  void sweep(std::size_t feature, std::span<const Entry> sorted, Keep&& keep, std::optional<SplitCandidate>& best) {
    const std::size_t n = parent_.n;
    if (n < 2 * min_leaf_) return;
    const double nd = static_cast<double>(n);
    const double floor = parent_.impurity * kRelativeTolerance;
    auto consider = [&](float below, float above, double decrease) {
      if (decrease <= floor) return;
      if (best && decrease <= best->impurity_decrease + floor) return;
      const double threshold = (static_cast<double>(below) + static_cast<double>(above)) / 2.0;
      best = SplitCandidate{feature, threshold, decrease};
    };

    std::size_t n_left = 0;
    const Entry* prev = nullptr;
    if (targets_.mode == TreeMode::Classification) {
      std::fill(left_.begin(), left_.end(), 0u);
      std::copy(parent_.counts.begin(), parent_.counts.end(), right_.begin());
      std::uint64_t sq_left = 0;
      std::uint64_t sq_right = parent_.sum_sq_counts;
      for (const Entry& e : sorted) {
        if (!keep(e)) continue;
        if (prev != nullptr && n_left >= min_leaf_ && n - n_left >= min_leaf_ && prev->value < e.value) {
          const double nl = static_cast<double>(n_left);
          const double nr = static_cast<double>(n - n_left);
          const double weighted =
              (nl - static_cast<double>(sq_left) / nl + nr - static_cast<double>(sq_right) / nr) / nd;
          consider(prev->value, e.value, parent_.impurity - weighted);
        }
        const std::uint32_t y = targets_.labels[e.row];
        sq_left += 2ull * left_[y] + 1;
        ++left_[y];
        sq_right -= 2ull * right_[y] - 1;
        --right_[y];
        prev = &e;
        if (++n_left == n) break;
      }
    } else {
      const double total = parent_.sum;
      const double base = total * total / nd;
      double sum_left = 0.0;
      for (const Entry& e : sorted) {
        if (!keep(e)) continue;
        if (prev != nullptr && n_left >= min_leaf_ && n - n_left >= min_leaf_ && prev->value < e.value) {
          const double sum_right = total - sum_left;
          const double decrease = (sum_left * sum_left / static_cast<double>(n_left) +
                                   sum_right * sum_right / static_cast<double>(n - n_left) - base) /
                                  nd;
          consider(prev->value, e.value, decrease);
        }
        sum_left += targets_.values[e.row];
        prev = &e;
        if (++n_left == n) break;
      }
    }
  }

 private:
  const Targets& targets_;
  const NodeStats& parent_;
  std::size_t min_leaf_;
  std::vector<std::uint32_t> left_;
  std::vector<std::uint32_t> right_;
};

void gather_sorted(const LabeledMatrix& matrix, std::span<const std::size_t> rows, std::size_t feature,
                   std::vector<Entry>& out) {
  out.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out[i] = Entry{matrix.at(rows[i], feature), static_cast<std::uint32_t>(rows[i])};
  }
  std::sort(out.begin(), out.end(), entry_less);
}

void check_targets(const LabeledMatrix& matrix, const Targets& targets) {
  if (targets.mode == TreeMode::Classification) {
    if (targets.labels.size() != matrix.rows() || targets.classes == 0) {
      throw Error(ErrorCode::InvalidArgument, "classification targets do not cover the matrix rows");
    }
  } else if (targets.values.size() != matrix.rows()) {
    throw Error(ErrorCode::InvalidArgument, "regression targets do not cover the matrix rows");
  }
}

}  // namespace

double gini_impurity(std::span<const std::uint32_t> class_counts) {
  double total = 0.0;
  for (std::uint32_t c : class_counts) total += c;
  if (total == 0.0) throw Error(ErrorCode::EmptyNode, "gini impurity of an empty node");
  double sum_sq = 0.0;
  for (std::uint32_t c : class_counts) {
    const double p = c / total;
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

SortedColumns::SortedColumns(const LabeledMatrix& matrix, std::span<const std::size_t> rows)
    : universe_(rows.size()), entries_(matrix.cols() * rows.size()) {
  for (std::size_t f = 0; f < matrix.cols(); ++f) {
    Entry* col = entries_.data() + f * universe_;
    for (std::size_t i = 0; i < universe_; ++i) col[i] = Entry{matrix.at(rows[i], f), static_cast<std::uint32_t>(rows[i])};
    std::sort(col, col + universe_, entry_less);
  }
}

std::optional<SplitCandidate> best_split(const LabeledMatrix& matrix, std::span<const std::size_t> rows,
                                         std::span<const std::size_t> features, const Targets& targets,
                                         std::size_t min_leaf) {
  check_targets(matrix, targets);
  if (rows.size() < 2 || features.empty()) return std::nullopt;
  const NodeStats parent = node_stats(rows, targets);
  if (parent.impurity <= 0.0) return std::nullopt;

  std::vector<std::size_t> ordered(features.begin(), features.end());
  std::sort(ordered.begin(), ordered.end());
  SplitSweeper sweeper(targets, parent, min_leaf);
  std::optional<SplitCandidate> best;
  std::vector<Entry> sorted;
  for (std::size_t f : ordered) {
    if (f >= matrix.cols()) throw Error(ErrorCode::FeatureOutOfRange, "candidate feature " + std::to_string(f));
    gather_sorted(matrix, rows, f, sorted);
    sweeper.sweep(f, sorted, [](const Entry&) { return true; }, best);
  }
  return best;
}

class TreeBuilder {
 public:
  TreeBuilder(const LabeledMatrix& matrix, const Targets& targets, const TreeParams& params, Rng& rng,
              const SortedColumns* presorted)
      : matrix_(matrix), targets_(targets), params_(params), rng_(rng), presorted_(presorted) {
    const std::size_t m = matrix.cols();
    mtry_ = params.mtry == 0 ? m : std::min(params.mtry, m);
    pool_.resize(m);
    std::iota(pool_.begin(), pool_.end(), std::size_t{0});
    if (presorted_ != nullptr) mark_.assign(matrix.rows(), 0);
  }

  Tree build(std::span<const std::size_t> rows) {
    Tree tree(targets_.mode, targets_.mode == TreeMode::Classification ? targets_.classes : 0);
    work_.assign(rows.begin(), rows.end());

    struct Pending {
      std::uint32_t node;
      std::size_t begin;
      std::size_t end;
      int depth;
    };
    tree.nodes_.emplace_back();
    std::vector<Pending> stack{{0, 0, work_.size(), 0}};
    while (!stack.empty()) {
      const Pending job = stack.back();
      stack.pop_back();
      std::span<std::size_t> segment(work_.data() + job.begin, job.end - job.begin);
      const NodeStats stats = node_stats(segment, targets_);

      std::optional<SplitCandidate> split;
      const bool depth_ok = params_.max_depth < 0 || job.depth < params_.max_depth;
      if (depth_ok && stats.n >= 2 * std::max<std::size_t>(params_.min_leaf, 1) && stats.impurity > 0.0) {
        split = search(segment, stats);
      }
      if (!split) {
        make_leaf(tree, job.node, segment, stats);
        continue;
      }

      auto middle = std::stable_partition(segment.begin(), segment.end(), [&](std::size_t r) {
        return static_cast<double>(matrix_.at(r, split->feature)) <= split->threshold;
      });
      const std::size_t split_at = job.begin + static_cast<std::size_t>(middle - segment.begin());

      const auto left = static_cast<std::uint32_t>(tree.nodes_.size());
      tree.nodes_.emplace_back();
      const auto right = static_cast<std::uint32_t>(tree.nodes_.size());
      tree.nodes_.emplace_back();
      auto& node = tree.nodes_[job.node];
      node.feature = static_cast<std::int32_t>(split->feature);
      node.threshold = split->threshold;
      node.left = left;
      node.right = right;
      node.gain = static_cast<double>(stats.n) * split->impurity_decrease;
      tree.max_feature_ = std::max(tree.max_feature_, split->feature + 1);

      stack.push_back({right, split_at, job.end, job.depth + 1});
      stack.push_back({left, job.begin, split_at, job.depth + 1});
    }
    return tree;
  }

 private:
  std::optional<SplitCandidate> search(std::span<const std::size_t> segment, const NodeStats& stats) {
    features_.clear();
    if (mtry_ >= pool_.size()) {
      features_.assign(pool_.begin(), pool_.end());
    } else {
      for (std::size_t i = 0; i < mtry_; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng_.below(pool_.size() - i));
        std::swap(pool_[i], pool_[j]);
        features_.push_back(pool_[i]);
      }
    }
    std::sort(features_.begin(), features_.end());

    const double n = static_cast<double>(segment.size());
    const bool use_presorted =
        presorted_ != nullptr && n * std::log2(std::max(n, 2.0)) > static_cast<double>(presorted_->universe());
    if (use_presorted) {
      ++serial_;
      for (std::size_t r : segment) mark_[r] = serial_;
    }

    SplitSweeper sweeper(targets_, stats, params_.min_leaf);
    std::optional<SplitCandidate> best;
    for (std::size_t f : features_) {
      if (use_presorted) {
        sweeper.sweep(f, presorted_->column(f), [&](const Entry& e) { return mark_[e.row] == serial_; }, best);
      } else {
        gather_sorted(matrix_, segment, f, scratch_);
        sweeper.sweep(f, scratch_, [](const Entry&) { return true; }, best);
      }
    }
    return best;
  }

  void make_leaf(Tree& tree, std::uint32_t node, std::span<const std::size_t> segment, const NodeStats& stats) {
    auto& leaf = tree.nodes_[node];
    leaf.feature = -1;
    if (targets_.mode == TreeMode::Classification) {
      leaf.leaf = static_cast<std::uint32_t>(tree.leaf_counts_.size() / targets_.classes);
      tree.leaf_counts_.insert(tree.leaf_counts_.end(), stats.counts.begin(), stats.counts.end());
    } else {
      leaf.leaf = static_cast<std::uint32_t>(tree.leaf_values_.size());
      tree.leaf_values_.push_back(segment.empty() ? 0.0 : stats.sum / static_cast<double>(stats.n));
    }
  }

  const LabeledMatrix& matrix_;
  const Targets& targets_;
  const TreeParams& params_;
  Rng& rng_;
  const SortedColumns* presorted_;
  std::size_t mtry_ = 0;
  std::vector<std::size_t> pool_;
  std::vector<std::size_t> features_;
  std::vector<std::size_t> work_;
  std::vector<Entry> scratch_;
  std::vector<std::uint32_t> mark_;
  std::uint32_t serial_ = 0;
};

Tree grow_tree(const LabeledMatrix& matrix, std::span<const std::size_t> rows, const Targets& targets,
               const TreeParams& params, Rng& rng, const SortedColumns* presorted) {
  check_targets(matrix, targets);
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "cannot grow a tree on zero rows");
  for (std::size_t r : rows) {
    if (r >= matrix.rows()) throw Error(ErrorCode::InvalidArgument, "training row out of range");
  }
  TreeBuilder builder(matrix, targets, params, rng, presorted);
  return builder.build(rows);
}

std::size_t Tree::leaf_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

std::size_t Tree::depth() const {
  if (nodes_.empty()) return 0;
  std::size_t deepest = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [index, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const Node& n = nodes_[index];
    if (!n.is_leaf()) {
      stack.push_back({n.left, d + 1});
      stack.push_back({n.right, d + 1});
    }
  }
  return deepest;
}

std::size_t Tree::route(std::span<const float> sample) const {
  if (sample.size() < max_feature_) {
    throw Error(ErrorCode::FeatureOutOfRange, "sample has " + std::to_string(sample.size()) +
                                                   " features, tree uses feature " + std::to_string(max_feature_ - 1));
  }
  std::size_t index = 0;
  while (!nodes_[index].is_leaf()) {
    const Node& n = nodes_[index];
    index = static_cast<double>(sample[static_cast<std::size_t>(n.feature)]) <= n.threshold ? n.left : n.right;
  }
  return index;
}

std::span<const std::uint32_t> Tree::leaf_histogram(std::size_t node) const {
  return {leaf_counts_.data() + static_cast<std::size_t>(nodes_[node].leaf) * classes_, classes_};
}

double Tree::leaf_value(std::size_t node) const { return leaf_values_[nodes_[node].leaf]; }

std::span<const std::uint32_t> Tree::predict_histogram(std::span<const float> sample) const {
  return leaf_histogram(route(sample));
}

std::uint32_t Tree::predict_class(std::span<const float> sample) const {
  const auto hist = predict_histogram(sample);
  return static_cast<std::uint32_t>(std::max_element(hist.begin(), hist.end()) - hist.begin());
}

double Tree::predict_value(std::span<const float> sample) const { return leaf_value(route(sample)); }

void Tree::accumulate_importance(std::span<double> importance) const {
  for (const Node& n : nodes_) {
    if (!n.is_leaf()) importance[static_cast<std::size_t>(n.feature)] += n.gain;
  }
}

void Tree::write(ByteWriter& out) const {
  out.u8(static_cast<std::uint8_t>(mode_));
  out.u32(static_cast<std::uint32_t>(classes_));
  out.u32(static_cast<std::uint32_t>(max_feature_));
  out.u32(static_cast<std::uint32_t>(nodes_.size()));
  for (const Node& n : nodes_) {
    out.i32(n.feature);
    out.f64(n.threshold);
    out.u32(n.left);
    out.u32(n.right);
    out.u32(n.leaf);
    out.f64(n.gain);
  }
  out.u32(static_cast<std::uint32_t>(leaf_counts_.size()));
  for (std::uint32_t c : leaf_counts_) out.u32(c);
  out.u32(static_cast<std::uint32_t>(leaf_values_.size()));
  for (double v : leaf_values_) out.f64(v);
}

Tree Tree::read(ByteReader& in) {
  Tree t;
  const std::uint8_t mode = in.u8();
  if (mode > 1) throw Error(ErrorCode::BadMagic, "unknown tree mode");
  t.mode_ = static_cast<TreeMode>(mode);
  t.classes_ = in.u32();
  t.max_feature_ = in.u32();
  const std::uint32_t node_count = in.u32();
  if (node_count > in.remaining() / 32) throw Error(ErrorCode::TruncatedFile, "tree node table");
  t.nodes_.resize(node_count);
  for (Node& n : t.nodes_) {
    n.feature = in.i32();
    n.threshold = in.f64();
    n.left = in.u32();
    n.right = in.u32();
    n.leaf = in.u32();
    n.gain = in.f64();
  }
  const std::uint32_t counts = in.u32();
  if (counts > in.remaining() / 4) throw Error(ErrorCode::TruncatedFile, "tree leaf table");
  t.leaf_counts_.resize(counts);
  for (auto& c : t.leaf_counts_) c = in.u32();
  const std::uint32_t values = in.u32();
  if (values > in.remaining() / 8) throw Error(ErrorCode::TruncatedFile, "tree leaf values");
  t.leaf_values_.resize(values);
  for (auto& v : t.leaf_values_) v = in.f64();

  // Structural validation so a corrupted-but-checksummed file cannot index out of bounds.
  for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
    const Node& n = t.nodes_[i];
    const bool ok = n.is_leaf()
                        ? (t.mode_ == TreeMode::Classification ? (n.leaf + 1ull) * t.classes_ <= t.leaf_counts_.size()
                                                                : n.leaf < t.leaf_values_.size())
                        : (n.left > i && n.right > i && n.left < node_count && n.right < node_count &&
                           static_cast<std::size_t>(n.feature) < t.max_feature_);
    if (!ok) throw Error(ErrorCode::InvalidArgument, "inconsistent tree structure in container");
  }
  return t;
}

}  // namespace expressml
