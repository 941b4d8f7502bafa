#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "expressml/binary_io.hpp"
#include "expressml/dataset.hpp"
#include "expressml/error.hpp"
#include "fixtures.hpp"

using namespace expressml;

namespace {

/// Matrix with the given class sizes and one dummy column.
LabeledMatrix sized(const std::vector<std::size_t>& sizes) {
  std::vector<float> values;
  std::vector<std::uint32_t> labels;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    for (std::size_t i = 0; i < sizes[c]; ++i) {
      values.push_back(static_cast<float>(labels.size()));
      labels.push_back(static_cast<std::uint32_t>(c));
    }
  }
  return fixtures::matrix(std::move(values), 1, std::move(labels), sizes.size());
}

std::vector<std::size_t> train_per_class(const LabeledMatrix& m, const SplitIndices& s) {
  std::vector<std::size_t> counts(m.classes(), 0);
  for (std::size_t r : s.train_rows) ++counts[m.label(r)];
  return counts;
}

LabeledMatrix three_by_four() {
  return LabeledMatrix({1.5f, -2.0f, 0.0f, 3.25f, 0.5f, 0.25f, -0.125f, 9.0f, 7.0f, -7.0f, 1e-3f, 2.0f},
                       {"ACTB", "BRCA1", "EGFR", "TP53"}, {"Breast/Carcinoma", "Lung/Adenocarcinoma"}, {1, 0, 1});
}

}  // namespace

TEST(LabeledMatrix, ValidatesInvariants) {
  EXPECT_THROW(LabeledMatrix({1, 2}, {"b", "a"}, {"x"}, {0}), Error);
  EXPECT_THROW(LabeledMatrix({1, 2}, {"a", "a"}, {"x"}, {0}), Error);
  EXPECT_THROW(LabeledMatrix({1}, {"a"}, {"x"}, {1}), Error);
  EXPECT_THROW(LabeledMatrix({1, 2, 3}, {"a", "b"}, {"x"}, {0}), Error);
  EXPECT_NO_THROW(LabeledMatrix({1, 2}, {"a", "b"}, {"x"}, {0}));
}

TEST(LabeledMatrix, SelectColumnsKeepsSortedNames) {
  const auto m = three_by_four();
  const std::vector<std::size_t> cols{3, 0};
  const auto sub = m.select_columns(cols);
  EXPECT_EQ(sub.gene_names(), (std::vector<std::string>{"ACTB", "TP53"}));
  EXPECT_EQ(sub.at(1, 0), 0.5f);
  EXPECT_EQ(sub.at(1, 1), 9.0f);
  EXPECT_EQ(sub.row_class(), m.row_class());
}

TEST(StratifiedSplit, SeventeenClassCounts) {
  // 17 classes summing to 5,629 rows.
  std::vector<std::size_t> sizes{601, 48, 512, 380, 290, 410, 333, 275, 260, 455, 199, 312, 388, 240, 301, 350, 275};
  std::size_t total = 0;
  for (auto s : sizes) total += s;
  ASSERT_EQ(total, 5629u);
  const auto m = sized(sizes);
  const auto split = stratified_split(m, 0.75, 42);
  EXPECT_EQ(split.train_rows.size(), 4221u);
  EXPECT_EQ(split.test_rows.size(), 1408u);
}

TEST(StratifiedSplit, SingleClassOfFour) {
  const auto split = stratified_split(sized({4}), 0.75, 1);
  EXPECT_EQ(split.train_rows.size(), 3u);
  EXPECT_EQ(split.test_rows.size(), 1u);
}

TEST(StratifiedSplit, LargestRemainderGoesToClassA) {
  const auto m = sized({5, 3});
  const auto split = stratified_split(m, 0.75, 3);
  EXPECT_EQ(split.train_rows.size(), 6u);
  EXPECT_EQ(train_per_class(m, split), (std::vector<std::size_t>{4, 2}));
}

TEST(StratifiedSplit, ClassTooSmall) {
  try {
    stratified_split(sized({5, 1}), 0.75, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ClassTooSmall);
    EXPECT_NE(std::string(e.what()).find("ClassB"), std::string::npos);
  }
}

TEST(StratifiedSplit, RejectsBadFraction) {
  EXPECT_THROW(stratified_split(sized({4}), 0.0, 0), Error);
  EXPECT_THROW(stratified_split(sized({4}), 1.0, 0), Error);
}

TEST(StratifiedSplit, PartitionAndQuotaProperties) {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t classes = 1 + gen() % 8;
    std::vector<std::size_t> sizes(classes);
    for (auto& s : sizes) s = 2 + gen() % 40;
    const double fraction = 0.05 + 0.9 * std::uniform_real_distribution<double>()(gen);
    const auto m = sized(sizes);
    const auto split = stratified_split(m, fraction, gen());

    std::vector<std::size_t> all = split.train_rows;
    all.insert(all.end(), split.test_rows.begin(), split.test_rows.end());
    std::sort(all.begin(), all.end());
    ASSERT_EQ(all, fixtures::all_rows(m)) << "partition, trial " << trial;
    ASSERT_EQ(split.train_rows.size(), static_cast<std::size_t>(std::floor(fraction * m.rows() + 1e-9)));

    // Each class gets its floor quota, plus at most one extra slot.
    const auto per_class = train_per_class(m, split);
    for (std::size_t c = 0; c < classes; ++c) {
      const auto base = static_cast<std::size_t>(std::floor(fraction * sizes[c] + 1e-9));
      EXPECT_GE(per_class[c], base);
      EXPECT_LE(per_class[c], base + 1);
    }
  }
}

TEST(StratifiedSplit, SeedDeterminesMembership) {
  const auto m = sized({10, 12, 9});
  EXPECT_EQ(stratified_split(m, 0.75, 5), stratified_split(m, 0.75, 5));
  EXPECT_NE(stratified_split(m, 0.75, 5).train_rows, stratified_split(m, 0.75, 6).train_rows);
}

TEST(SplitFile, RoundTripAndFingerprintCheck) {
  fixtures::TempDir dir("split");
  const auto m = sized({6, 6});
  const auto split = stratified_split(m, 0.5, 9);
  const auto fp = dataset_fingerprint(m);
  save_split(split, fp, dir.file("s.json"));
  EXPECT_EQ(load_split(dir.file("s.json"), fp), split);
  try {
    load_split(dir.file("s.json"), fp ^ 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DatasetMismatch);
  }
}

TEST(DatasetContainer, RoundTrip3x4) {
  fixtures::TempDir dir("ds");
  const auto m = three_by_four();
  save_dataset(m, dir.file("d.exml"));
  const auto back = load_dataset(dir.file("d.exml"));
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.gene_names(), m.gene_names());
  EXPECT_EQ(back.class_names(), m.class_names());
  EXPECT_EQ(back.row_class(), m.row_class());
}

TEST(DatasetContainer, ByteStable) {
  const auto bytes = encode_dataset(three_by_four());
  EXPECT_EQ(encode_dataset(decode_dataset(bytes)), bytes);
}

TEST(DatasetContainer, CorruptedMagic) {
  auto bytes = encode_dataset(three_by_four());
  bytes[0] = 'X';
  try {
    decode_dataset(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadMagic);
  }
}

TEST(DatasetContainer, TruncatedMidPayload) {
  auto bytes = encode_dataset(three_by_four());
  bytes.resize(bytes.size() / 2);
  try {
    decode_dataset(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TruncatedFile);
  }
}

TEST(DatasetContainer, FlippedPayloadByte) {
  auto bytes = encode_dataset(three_by_four());
  bytes[bytes.size() - 10] ^= 0x40;
  try {
    decode_dataset(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ChecksumMismatch);
  }
}

TEST(DatasetContainer, VersionMismatch) {
  auto bytes = encode_dataset(three_by_four());
  bytes[4] = 99;
  // Re-seal so only the version is wrong.
  ByteWriter w;
  w.bytes(std::span<const std::uint8_t>(bytes.data(), bytes.size() - 4));
  w.seal();
  try {
    decode_dataset(w.data());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::VersionMismatch);
  }
}

TEST(Synthetic, TwoClassesOneGeneOppositeSigns) {
  SynthSpec spec;
  spec.classes = 2;
  spec.samples_per_class = 2;
  spec.genes = 1;
  spec.informative_genes = 1;
  spec.effect_size = 10.0;
  spec.noise_sd = 0.1;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    spec.seed = seed;
    const auto data = generate_synthetic(spec);
    const auto& m = data.matrix;
    ASSERT_EQ(m.rows(), 4u);
    float sign_of_class[2] = {0, 0};
    for (std::size_t r = 0; r < 4; ++r) {
      const float s = m.at(r, 0) > 0 ? 1.0f : -1.0f;
      if (sign_of_class[m.label(r)] == 0) sign_of_class[m.label(r)] = s;
      EXPECT_EQ(sign_of_class[m.label(r)], s) << "seed " << seed;
    }
    EXPECT_EQ(sign_of_class[0], -sign_of_class[1]) << "seed " << seed;
    EXPECT_EQ(data.planted_genes, std::vector<std::string>{m.gene_names()[0]});
  }
}

TEST(Synthetic, Deterministic) {
  SynthSpec spec;
  spec.genes = 100;
  spec.informative_genes = 10;
  spec.classes = 4;
  spec.samples_per_class = 6;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  EXPECT_EQ(a.matrix, b.matrix);
  EXPECT_EQ(a.planted_genes, b.planted_genes);
  spec.seed = 43;
  EXPECT_NE(generate_synthetic(spec).matrix, a.matrix);
}

TEST(Synthetic, ColumnsStandardized) {
  SynthSpec spec;
  spec.genes = 300;
  spec.informative_genes = 30;
  const auto m = generate_synthetic(spec).matrix;
  for (std::size_t g = 0; g < m.cols(); ++g) {
    double sum = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) sum += m.at(r, g);
    const double mean = sum / static_cast<double>(m.rows());
    double ss = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) ss += (m.at(r, g) - mean) * (m.at(r, g) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(m.rows() - 1));
    EXPECT_LT(std::abs(mean), 1e-5) << g;
    EXPECT_LT(std::abs(sd - 1.0), 1e-3) << g;
  }
}

TEST(Synthetic, ShapeAndNames) {
  const auto data = generate_synthetic(SynthSpec{});
  EXPECT_EQ(data.matrix.rows(), 17u * 40u);
  EXPECT_EQ(data.matrix.cols(), 2000u);
  EXPECT_EQ(data.matrix.classes(), 17u);
  EXPECT_EQ(data.planted_genes.size(), 50u);
  EXPECT_TRUE(std::is_sorted(data.planted_genes.begin(), data.planted_genes.end()));
  std::set<std::string> genes(data.matrix.gene_names().begin(), data.matrix.gene_names().end());
  for (const auto& g : data.planted_genes) EXPECT_TRUE(genes.count(g));
}

TEST(Synthetic, InvalidSpec) {
  SynthSpec spec;
  spec.informative_genes = spec.genes + 1;
  EXPECT_THROW(generate_synthetic(spec), Error);
  spec = SynthSpec{};
  spec.samples_per_class = 1;
  EXPECT_THROW(generate_synthetic(spec), Error);
  spec = SynthSpec{};
  spec.effect_size = 0.0;
  try {
    generate_synthetic(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidSpec);
  }
}
