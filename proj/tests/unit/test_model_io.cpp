#include <gtest/gtest.h>

#include "expressml/error.hpp"
#include "expressml/model.hpp"
#include "fixtures.hpp"

using namespace expressml;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.forest.n_trees = 5;
  c.gbm.n_rounds = 3;
  c.ferns.n_ferns = 6;
  c.ferns.depth = 3;
  c.linear.epochs = 2;
  c.knn.k = 3;
  return c;
}

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

class ModelIo : public ::testing::TestWithParam<ModelFamily> {
 protected:
  std::shared_ptr<const LabeledMatrix> data = fixtures::share(fixtures::blobs(8, 3, 6, 3, 1.0, 17));
  SplitIndices split = stratified_split(*data, 0.75, 4);
};

}  // namespace

TEST(Family, ParseAndName) {
  EXPECT_EQ(parse_family("rf"), ModelFamily::RF);
  EXPECT_EQ(parse_family("GBM"), ModelFamily::GBM);
  EXPECT_EQ(parse_family("RFern"), ModelFamily::RFERN);
  EXPECT_EQ(parse_family("svm"), ModelFamily::SVM);
  EXPECT_EQ(parse_family("knn"), ModelFamily::KNN);
  EXPECT_FALSE(parse_family("bogus").has_value());
  for (ModelFamily f : kAllFamilies) EXPECT_EQ(parse_family(to_string(f)), f);
}

TEST(Family, SetSeedReachesEverySeededFamily) {
  TrainConfig c;
  c.set_seed(99);
  EXPECT_EQ(c.forest.seed, 99u);
  EXPECT_EQ(c.gbm.seed, 99u);
  EXPECT_EQ(c.ferns.seed, 99u);
  EXPECT_EQ(c.linear.seed, 99u);
}

TEST_P(ModelIo, RoundTripPreservesPredictions) {
  const auto model = train_model(data, split.train_rows, GetParam(), small_config());
  const auto bytes = encode_model(model);
  const auto back = decode_model(bytes, data);
  EXPECT_EQ(back.family(), GetParam());
  EXPECT_EQ(back.class_names(), model.class_names());
  EXPECT_EQ(back.gene_names(), model.gene_names());
  for (std::size_t r = 0; r < data->rows(); ++r) EXPECT_EQ(back.predict(data->row(r)), model.predict(data->row(r)));
  EXPECT_EQ(encode_model(back), bytes);
}

TEST_P(ModelIo, FileRoundTrip) {
  fixtures::TempDir dir("model");
  const auto model = train_model(data, split.train_rows, GetParam(), small_config());
  save_model(model, dir.file("m.exmm"));
  const auto back = load_model(dir.file("m.exmm"), data);
  EXPECT_EQ(encode_model(back), encode_model(model));
}

TEST_P(ModelIo, TruncationDetected) {
  const auto bytes = encode_model(train_model(data, split.train_rows, GetParam(), small_config()));
  for (std::size_t keep : {std::size_t{3}, std::size_t{12}, bytes.size() / 2, bytes.size() - 5}) {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(keep));
    const auto code = code_of([&] { decode_model(cut, data); });
    EXPECT_TRUE(code == ErrorCode::TruncatedFile || code == ErrorCode::ChecksumMismatch) << keep;
  }
}

TEST_P(ModelIo, CorruptionDetected) {
  auto bytes = encode_model(train_model(data, split.train_rows, GetParam(), small_config()));
  bytes[bytes.size() - 9] ^= 0x01;
  EXPECT_EQ(code_of([&] { decode_model(bytes, data); }), ErrorCode::ChecksumMismatch);
  bytes[bytes.size() - 9] ^= 0x01;
  bytes[1] = 'Q';
  EXPECT_EQ(code_of([&] { decode_model(bytes, data); }), ErrorCode::BadMagic);
}

INSTANTIATE_TEST_SUITE_P(AllFamilies, ModelIo, ::testing::ValuesIn(kAllFamilies),
                         [](const ::testing::TestParamInfo<ModelFamily>& info) { return to_string(info.param); });

TEST(ModelIoKnn, NeedsMatchingDataset) {
  const auto data = fixtures::share(fixtures::blobs(5, 2, 4, 2, 1.0, 1));
  TrainConfig cfg;
  cfg.knn.k = 2;
  const auto bytes = encode_model(train_model(data, fixtures::all_rows(*data), ModelFamily::KNN, cfg));
  const auto other = fixtures::share(fixtures::blobs(5, 2, 4, 2, 1.0, 2));
  EXPECT_EQ(code_of([&] { decode_model(bytes, other); }), ErrorCode::DatasetMismatch);
  EXPECT_EQ(code_of([&] { decode_model(bytes, nullptr); }), ErrorCode::InvalidArgument);
  EXPECT_NO_THROW(decode_model(bytes, data));
}

TEST(ModelIoKnn, OtherFamiliesIgnoreDataset) {
  const auto data = fixtures::share(fixtures::blobs(5, 2, 4, 2, 1.0, 1));
  const auto bytes = encode_model(train_model(data, fixtures::all_rows(*data), ModelFamily::RF, small_config()));
  EXPECT_NO_THROW(decode_model(bytes, nullptr));
}

TEST(TrainedModel, ImportanceOnlyForEnsembles) {
  const auto data = fixtures::share(fixtures::blobs(5, 2, 4, 2, 1.0, 1));
  const auto rows = fixtures::all_rows(*data);
  for (ModelFamily f : kAllFamilies) {
    const auto model = train_model(data, rows, f, small_config());
    const bool ensemble = f == ModelFamily::RF || f == ModelFamily::GBM;
    EXPECT_EQ(model.importance().has_value(), ensemble) << to_string(f);
  }
}
