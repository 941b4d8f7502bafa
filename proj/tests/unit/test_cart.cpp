#include <gtest/gtest.h>

#include <numeric>

#include "expressml/cart.hpp"
#include "expressml/error.hpp"
#include "fixtures.hpp"

using namespace expressml;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::InvalidArgument;
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

double accuracy(const Tree& t, const LabeledMatrix& m) {
  std::size_t hit = 0;
  for (std::size_t r = 0; r < m.rows(); ++r) hit += t.predict_class(m.row(r)) == m.label(r);
  return static_cast<double>(hit) / static_cast<double>(m.rows());
}

}  // namespace

TEST(Gini, WorkedValues) {
  const std::uint32_t pure[] = {4, 0};
  const std::uint32_t even[] = {2, 2};
  const std::uint32_t three[] = {1, 1, 2};
  EXPECT_DOUBLE_EQ(gini_impurity(pure), 0.0);
  EXPECT_DOUBLE_EQ(gini_impurity(even), 0.5);
  EXPECT_DOUBLE_EQ(gini_impurity(three), 0.625);
}

TEST(Gini, EmptyNode) {
  const std::uint32_t none[] = {0, 0};
  EXPECT_EQ(code_of([&] { gini_impurity(none); }), ErrorCode::EmptyNode);
}

TEST(BestSplit, MidpointOfTheGap) {
  const auto m = fixtures::matrix({1, 2, 9, 10}, 1, {0, 0, 1, 1}, 2);
  const auto rows = iota(4);
  const std::vector<std::size_t> feats{0};
  const auto s = best_split(m, rows, feats, Targets::classification(m.row_class(), 2));
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->feature, 0u);
  EXPECT_DOUBLE_EQ(s->threshold, 5.5);
  EXPECT_DOUBLE_EQ(s->impurity_decrease, 0.5);
}

TEST(BestSplit, IdenticalRowsHaveNoSplit) {
  const auto m = fixtures::matrix({3, 3, 3, 3, 3, 3}, 2, {0, 1, 0}, 2);
  const auto rows = iota(3);
  const std::vector<std::size_t> feats{0, 1};
  EXPECT_FALSE(best_split(m, rows, feats, Targets::classification(m.row_class(), 2)).has_value());
}

TEST(BestSplit, ConstantRegressionTargetHasNoSplit) {
  const auto m = fixtures::matrix({1, 2, 3, 4}, 1, {0, 0, 0, 0}, 1);
  const std::vector<double> y(4, 2.5);
  const auto rows = iota(4);
  const std::vector<std::size_t> feats{0};
  EXPECT_FALSE(best_split(m, rows, feats, Targets::regression(y)).has_value());
}

TEST(BestSplit, TiesGoToLowerFeature) {
  // Both columns separate the classes perfectly.
  const auto m = fixtures::matrix({1, 10, 2, 20, 9, 30, 10, 40}, 2, {0, 0, 1, 1}, 2);
  const auto rows = iota(4);
  const std::vector<std::size_t> feats{1, 0};
  const auto s = best_split(m, rows, feats, Targets::classification(m.row_class(), 2));
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->feature, 0u);
}

TEST(BestSplit, RespectsMinLeaf) {
  const auto m = fixtures::matrix({1, 2, 3, 4}, 1, {0, 1, 1, 1}, 2);
  const auto rows = iota(4);
  const std::vector<std::size_t> feats{0};
  const auto loose = best_split(m, rows, feats, Targets::classification(m.row_class(), 2), 1);
  ASSERT_TRUE(loose);
  EXPECT_DOUBLE_EQ(loose->threshold, 1.5);
  const auto tight = best_split(m, rows, feats, Targets::classification(m.row_class(), 2), 2);
  ASSERT_TRUE(tight);
  EXPECT_DOUBLE_EQ(tight->threshold, 2.5);
}

TEST(BestSplit, RegressionVarianceReduction) {
  const auto m = fixtures::matrix({0, 1, 2, 3}, 1, {0, 0, 0, 0}, 1);
  const std::vector<double> y{1, 1, 5, 5};
  const auto rows = iota(4);
  const std::vector<std::size_t> feats{0};
  const auto s = best_split(m, rows, feats, Targets::regression(y));
  ASSERT_TRUE(s);
  EXPECT_DOUBLE_EQ(s->threshold, 1.5);
  EXPECT_DOUBLE_EQ(s->impurity_decrease, 4.0);
}

TEST(BestSplit, FeatureOutOfRange) {
  const auto m = fixtures::matrix({1, 2}, 1, {0, 1}, 2);
  const auto rows = iota(2);
  const std::vector<std::size_t> feats{3};
  EXPECT_EQ(code_of([&] { best_split(m, rows, feats, Targets::classification(m.row_class(), 2)); }),
            ErrorCode::FeatureOutOfRange);
}

TEST(GrowTree, PureNodeIsSingleLeaf) {
  const auto m = fixtures::matrix({1, 2, 3}, 1, {1, 1, 1}, 2);
  const auto rows = iota(3);
  Rng rng(1);
  const auto t = grow_tree(m, rows, Targets::classification(m.row_class(), 2), {}, rng);
  EXPECT_EQ(t.nodes().size(), 1u);
  EXPECT_EQ(t.predict_class(m.row(0)), 1u);
}

TEST(GrowTree, DepthZeroIsMajorityLeaf) {
  const auto m = fixtures::matrix({1, 2, 3}, 1, {0, 1, 1}, 2);
  const auto rows = iota(3);
  Rng rng(1);
  TreeParams p;
  p.max_depth = 0;
  const auto t = grow_tree(m, rows, Targets::classification(m.row_class(), 2), p, rng);
  EXPECT_EQ(t.leaf_count(), 1u);
  EXPECT_EQ(t.predict_class(m.row(0)), 1u);
}

TEST(GrowTree, XorLearnedWithinDepthThree) {
  // Quadrant XOR with uneven quadrant sizes so the first cut has positive gain.
  std::vector<float> v;
  std::vector<std::uint32_t> y;
  auto add = [&](float a, float b) {
    v.push_back(a);
    v.push_back(b);
    y.push_back((a > 0) != (b > 0) ? 1u : 0u);
  };
  for (float a : {-3.0f, -2.0f, -1.0f}) add(a, -1.5f);
  for (float a : {-2.5f, -1.5f}) add(a, 2.0f);
  for (float a : {1.0f, 2.0f}) add(a, -2.0f);
  for (float a : {1.5f, 2.5f, 3.5f, 0.5f}) add(a, 1.0f);
  const auto m = fixtures::matrix(std::move(v), 2, std::move(y), 2);
  const auto rows = iota(m.rows());
  TreeParams p;
  p.mtry = 2;
  p.max_depth = 3;
  Rng rng(7);
  const auto t = grow_tree(m, rows, Targets::classification(m.row_class(), 2), p, rng);
  EXPECT_LE(t.depth(), 3u);
  EXPECT_DOUBLE_EQ(accuracy(t, m), 1.0);
}

TEST(GrowTree, BalancedFourPointXorHasNoGainfulFirstCut) {
  const auto m = fixtures::matrix({0, 0, 0, 1, 1, 0, 1, 1}, 2, {0, 1, 1, 0}, 2);
  const auto rows = iota(4);
  const std::vector<std::size_t> feats{0, 1};
  EXPECT_FALSE(best_split(m, rows, feats, Targets::classification(m.row_class(), 2)).has_value());
}

TEST(GrowTree, FitsDistinctTrainingRows) {
  const auto m = fixtures::blobs(15, 4, 6, 2, 0.5, 11);
  const auto rows = iota(m.rows());
  Rng rng(3);
  const auto t = grow_tree(m, rows, Targets::classification(m.row_class(), 4), {}, rng);
  EXPECT_DOUBLE_EQ(accuracy(t, m), 1.0);
}

TEST(GrowTree, DeterministicAndPresortAgnostic) {
  const auto m = fixtures::blobs(10, 3, 8, 3, 1.0, 5);
  const auto rows = iota(m.rows());
  TreeParams p;
  p.mtry = 3;
  p.max_depth = 4;
  const auto targets = Targets::classification(m.row_class(), 3);
  Rng a(99), b(99), c(99);
  const SortedColumns sorted(m, rows);
  const auto ta = grow_tree(m, rows, targets, p, a);
  const auto tb = grow_tree(m, rows, targets, p, b);
  const auto tc = grow_tree(m, rows, targets, p, c, &sorted);
  EXPECT_EQ(ta, tb);
  EXPECT_EQ(ta, tc);
}

TEST(GrowTree, RegressionLeavesAreMeans) {
  const auto m = fixtures::matrix({0, 1, 2, 3}, 1, {0, 0, 0, 0}, 1);
  const std::vector<double> y{1, 3, 10, 14};
  const auto rows = iota(4);
  Rng rng(1);
  TreeParams p;
  p.max_depth = 1;
  const auto t = grow_tree(m, rows, Targets::regression(y), p, rng);
  const float lo[] = {0.5f};
  const float hi[] = {2.5f};
  EXPECT_DOUBLE_EQ(t.predict_value(lo), 2.0);
  EXPECT_DOUBLE_EQ(t.predict_value(hi), 12.0);
}

TEST(Tree, ThresholdValueGoesLeft) {
  const auto m = fixtures::matrix({1, 2, 9, 10}, 1, {0, 0, 1, 1}, 2);
  const auto rows = iota(4);
  Rng rng(1);
  const auto t = grow_tree(m, rows, Targets::classification(m.row_class(), 2), {}, rng);
  const float at[] = {5.5f};
  const float above[] = {5.5001f};
  EXPECT_EQ(t.predict_class(at), 0u);
  EXPECT_EQ(t.predict_class(above), 1u);
}

namespace {

/// Depth-2 tree: x0 <= 0 ? (x1 <= 5 ? A : B) : C
Tree hand_tree() {
  ByteWriter w;
  w.u8(0);
  w.u32(3);
  w.u32(2);
  w.u32(5);
  auto node = [&](std::int32_t f, double thr, std::uint32_t l, std::uint32_t r, std::uint32_t leaf) {
    w.i32(f);
    w.f64(thr);
    w.u32(l);
    w.u32(r);
    w.u32(leaf);
    w.f64(0.0);
  };
  node(0, 0.0, 1, 4, 0);
  node(1, 5.0, 2, 3, 0);
  node(-1, 0, 0, 0, 0);
  node(-1, 0, 0, 0, 1);
  node(-1, 0, 0, 0, 2);
  const std::uint32_t counts[] = {3, 0, 0, 0, 2, 1, 0, 0, 4};
  w.u32(9);
  for (auto c : counts) w.u32(c);
  w.u32(0);
  ByteReader r(w.data());
  return Tree::read(r);
}

}  // namespace

TEST(Tree, HandBuiltDepthTwoRouting) {
  const Tree t = hand_tree();
  EXPECT_EQ(t.depth(), 2u);
  EXPECT_EQ(t.leaf_count(), 3u);
  const float a[] = {-1.0f, 5.0f};
  const float b[] = {0.0f, 6.0f};
  const float c[] = {0.1f, -100.0f};
  EXPECT_EQ(t.predict_class(a), 0u);
  EXPECT_EQ(t.predict_class(b), 1u);
  EXPECT_EQ(t.predict_class(c), 2u);
  const auto hist = t.predict_histogram(b);
  EXPECT_EQ(std::vector<std::uint32_t>(hist.begin(), hist.end()), (std::vector<std::uint32_t>{0, 2, 1}));
}

TEST(Tree, ShortSampleIsRejected) {
  const Tree t = hand_tree();
  const float one[] = {1.0f};
  EXPECT_EQ(code_of([&] { t.predict_class(one); }), ErrorCode::FeatureOutOfRange);
}

TEST(Tree, SerializationRoundTrip) {
  const auto m = fixtures::blobs(8, 3, 5, 2, 1.0, 2);
  const auto rows = iota(m.rows());
  Rng rng(4);
  const auto t = grow_tree(m, rows, Targets::classification(m.row_class(), 3), {}, rng);
  ByteWriter w;
  t.write(w);
  ByteReader r(w.data());
  EXPECT_EQ(Tree::read(r), t);
}
