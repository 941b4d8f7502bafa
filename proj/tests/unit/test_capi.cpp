#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "expressml/expressml.h"

namespace {

class Scratch {
 public:
  Scratch() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("expressml-capi-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~Scratch() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

std::string take(char* s) {
  std::string out = s ? s : "";
  em_string_free(s);
  return out;
}

em_dataset* small_synth(uint64_t seed = 5) {
  em_synth_spec spec;
  em_synth_spec_defaults(&spec);
  spec.classes = 3;
  spec.samples_per_class = 12;
  spec.genes = 40;
  spec.informative_genes = 6;
  spec.effect_size = 2.0;
  spec.seed = seed;
  em_dataset* ds = nullptr;
  char* planted = nullptr;
  EXPECT_EQ(em_synthesize(&spec, &ds, &planted), EM_OK) << em_last_error();
  EXPECT_FALSE(take(planted).empty());
  return ds;
}

em_train_params fast_params() {
  em_train_params p;
  em_train_params_defaults(&p);
  p.rf_trees = 20;
  p.gbm_rounds = 5;
  p.fern_count = 30;
  p.fern_depth = 3;
  p.svm_epochs = 3;
  p.knn_k = 3;
  p.workers = 2;
  return p;
}

}  // namespace

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STRNE(em_version(), "");
  EXPECT_STREQ(em_status_name(EM_OK), "Ok");
  EXPECT_STREQ(em_status_name(EM_ERR_CLASS_TOO_SMALL), "ClassTooSmall");
  EXPECT_STREQ(em_status_name(EM_ERR_DATASET_MISMATCH), "DatasetMismatch");
}

TEST(CApi, DefaultsMatchDocumentedValues) {
  em_train_params p;
  em_train_params_defaults(&p);
  EXPECT_EQ(p.seed, 42u);
  EXPECT_EQ(p.rf_trees, 500u);
  EXPECT_EQ(p.gbm_rounds, 100u);
  EXPECT_DOUBLE_EQ(p.gbm_shrinkage, 0.1);
  EXPECT_EQ(p.gbm_depth, 3u);
  EXPECT_EQ(p.fern_count, 1000u);
  EXPECT_EQ(p.fern_depth, 10u);
  EXPECT_DOUBLE_EQ(p.svm_lambda, 1e-4);
  EXPECT_EQ(p.svm_epochs, 20u);
  EXPECT_EQ(p.knn_k, 5u);
  em_synth_spec s;
  em_synth_spec_defaults(&s);
  EXPECT_EQ(s.classes, 17u);
  EXPECT_EQ(s.genes, 2000u);
  EXPECT_EQ(s.informative_genes, 50u);
}

TEST(CApi, DatasetFromArraysAndRoundTrip) {
  Scratch dir;
  const float values[] = {1, 2, 3, 4, 5, 6};
  const char* genes[] = {"A", "B"};
  const char* classes[] = {"x", "y"};
  const uint32_t labels[] = {0, 1, 1};
  em_dataset* ds = nullptr;
  ASSERT_EQ(em_dataset_from_arrays(values, 3, 2, genes, classes, 2, labels, &ds), EM_OK);
  EXPECT_EQ(em_dataset_rows(ds), 3u);
  EXPECT_EQ(em_dataset_cols(ds), 2u);
  EXPECT_EQ(em_dataset_classes(ds), 2u);
  EXPECT_STREQ(em_dataset_gene_name(ds, 1), "B");
  EXPECT_STREQ(em_dataset_class_name(ds, 0), "x");
  ASSERT_EQ(em_dataset_save(ds, dir.file("d.exml").c_str()), EM_OK);
  em_dataset* back = nullptr;
  ASSERT_EQ(em_dataset_load(dir.file("d.exml").c_str(), &back), EM_OK);
  EXPECT_EQ(em_dataset_fingerprint(back), em_dataset_fingerprint(ds));
  uint64_t hash = 0;
  ASSERT_EQ(em_file_hash(dir.file("d.exml").c_str(), &hash), EM_OK);
  EXPECT_EQ(hash, em_dataset_fingerprint(ds));
  em_dataset_free(back);
  em_dataset_free(ds);
}

TEST(CApi, ErrorsBecomeStatusCodes) {
  const float values[] = {1, 2};
  const char* unsorted[] = {"B", "A"};
  const char* classes[] = {"x"};
  const uint32_t labels[] = {0};
  em_dataset* ds = nullptr;
  EXPECT_EQ(em_dataset_from_arrays(values, 1, 2, unsorted, classes, 1, labels, &ds), EM_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(ds, nullptr);
  EXPECT_NE(std::string(em_last_error()).find("sorted"), std::string::npos);
  EXPECT_EQ(em_dataset_load("/nonexistent/file.exml", &ds), EM_ERR_IO);
  EXPECT_EQ(em_dataset_load(nullptr, &ds), EM_ERR_INVALID_ARGUMENT);
}

TEST(CApi, ClassTooSmallSplit) {
  const float values[] = {1, 2, 3, 4};
  const char* genes[] = {"A"};
  const char* classes[] = {"x", "y"};
  const uint32_t labels[] = {0, 0, 0, 1};
  em_dataset* ds = nullptr;
  ASSERT_EQ(em_dataset_from_arrays(values, 4, 1, genes, classes, 2, labels, &ds), EM_OK);
  em_split* split = nullptr;
  EXPECT_EQ(em_split_make(ds, 0.75, 1, &split), EM_ERR_CLASS_TOO_SMALL);
  em_dataset_free(ds);
}

TEST(CApi, TrainEvaluateSaveLoadEveryFamily) {
  Scratch dir;
  em_dataset* ds = small_synth();
  em_split* split = nullptr;
  ASSERT_EQ(em_split_make(ds, 0.75, 9, &split), EM_OK);
  EXPECT_EQ(em_split_train_count(split), 27u);
  EXPECT_EQ(em_split_test_count(split), 9u);
  ASSERT_EQ(em_split_save(split, ds, dir.file("s.json").c_str()), EM_OK);
  em_split* loaded = nullptr;
  ASSERT_EQ(em_split_load(dir.file("s.json").c_str(), ds, &loaded), EM_OK);
  EXPECT_EQ(em_split_seed(loaded), 9u);

  const em_train_params params = fast_params();
  for (const char* family : {"rf", "GBM", "rfern", "svm", "knn"}) {
    em_model* model = nullptr;
    double seconds = -1;
    ASSERT_EQ(em_train(ds, loaded, family, &params, &model, &seconds), EM_OK) << family << ": " << em_last_error();
    EXPECT_GE(seconds, 0.0);
    EXPECT_EQ(em_model_gene_count(model), 40u);
    em_report* report = nullptr;
    ASSERT_EQ(em_evaluate(model, ds, loaded, 1, &report), EM_OK);
    const double macro = em_report_macro_average(report);
    EXPECT_GE(macro, 0.0);
    EXPECT_LE(macro, 1.0);
    em_report_set_train_seconds(report, seconds);
    EXPECT_EQ(em_report_train_seconds(report), seconds);
    char* table = nullptr;
    ASSERT_EQ(em_report_table(report, &table), EM_OK);
    EXPECT_NE(take(table).find("Average"), std::string::npos);

    const std::string path = dir.file(std::string(family) + ".exmm");
    ASSERT_EQ(em_model_save(model, path.c_str()), EM_OK);
    em_model* back = nullptr;
    ASSERT_EQ(em_model_load(path.c_str(), ds, &back), EM_OK) << em_last_error();
    EXPECT_STREQ(em_model_family(back), em_model_family(model));
    em_report* again = nullptr;
    ASSERT_EQ(em_evaluate(back, ds, loaded, 2, &again), EM_OK);
    EXPECT_EQ(em_report_macro_average(again), macro);
    em_report_free(again);
    em_model_free(back);
    em_report_free(report);
    em_model_free(model);
  }
  em_split_free(loaded);
  em_split_free(split);
  em_dataset_free(ds);
}

TEST(CApi, UnknownFamilyAndPredictWidth) {
  em_dataset* ds = small_synth();
  em_split* split = nullptr;
  ASSERT_EQ(em_split_make(ds, 0.75, 1, &split), EM_OK);
  const em_train_params params = fast_params();
  em_model* model = nullptr;
  EXPECT_EQ(em_train(ds, split, "bogus", &params, &model, nullptr), EM_ERR_INVALID_PARAMS);
  ASSERT_EQ(em_train(ds, split, "knn", &params, &model, nullptr), EM_OK);
  float sample[3] = {0, 0, 0};
  uint32_t label = 0;
  EXPECT_EQ(em_model_predict(model, sample, 3, &label), EM_ERR_WIDTH_MISMATCH);
  em_ranking* r = nullptr;
  EXPECT_EQ(em_model_importance(model, &r), EM_ERR_INVALID_ARGUMENT);
  em_model_free(model);
  em_split_free(split);
  em_dataset_free(ds);
}

TEST(CApi, KnnModelNeedsItsDataset) {
  Scratch dir;
  em_dataset* ds = small_synth(1);
  em_dataset* other = small_synth(2);
  em_split* split = nullptr;
  ASSERT_EQ(em_split_make(ds, 0.75, 1, &split), EM_OK);
  const em_train_params params = fast_params();
  em_model* model = nullptr;
  ASSERT_EQ(em_train(ds, split, "knn", &params, &model, nullptr), EM_OK);
  ASSERT_EQ(em_model_save(model, dir.file("k.exmm").c_str()), EM_OK);
  em_model* back = nullptr;
  EXPECT_EQ(em_model_load(dir.file("k.exmm").c_str(), other, &back), EM_ERR_DATASET_MISMATCH);
  em_split* wrong = nullptr;
  ASSERT_EQ(em_split_save(split, ds, dir.file("s.json").c_str()), EM_OK);
  EXPECT_EQ(em_split_load(dir.file("s.json").c_str(), other, &wrong), EM_ERR_DATASET_MISMATCH);
  em_model_free(model);
  em_split_free(split);
  em_dataset_free(other);
  em_dataset_free(ds);
}

TEST(CApi, RankingsAndCascade) {
  Scratch dir;
  em_dataset* ds = small_synth();
  em_split* split = nullptr;
  ASSERT_EQ(em_split_make(ds, 0.75, 3, &split), EM_OK);
  const em_train_params params = fast_params();
  em_model* rf = nullptr;
  em_model* gbm = nullptr;
  ASSERT_EQ(em_train(ds, split, "rf", &params, &rf, nullptr), EM_OK);
  ASSERT_EQ(em_train(ds, split, "gbm", &params, &gbm, nullptr), EM_OK);
  em_ranking* a = nullptr;
  em_ranking* b = nullptr;
  em_ranking* c = nullptr;
  ASSERT_EQ(em_model_importance(rf, &a), EM_OK);
  ASSERT_EQ(em_model_importance(gbm, &b), EM_OK);
  ASSERT_EQ(em_combine_rankings(a, b, &c), EM_OK);
  ASSERT_EQ(em_ranking_size(c), 40u);
  double sum = 0.0;
  for (size_t i = 0; i < em_ranking_size(c); ++i) sum += em_ranking_score(c, i);
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_GE(em_ranking_score(c, 0), em_ranking_score(c, 1));
  ASSERT_EQ(em_ranking_write_csv(c, dir.file("r.csv").c_str()), EM_OK);
  EXPECT_TRUE(std::filesystem::exists(dir.file("r.csv")));

  const uint64_t schedule[] = {20, 10};
  em_cascade* cascade = nullptr;
  ASSERT_EQ(em_cascade_run(ds, split, schedule, 2, 5, &params, &cascade), EM_OK) << em_last_error();
  ASSERT_EQ(em_cascade_steps(cascade), 2u);
  EXPECT_EQ(em_cascade_step_k(cascade, 1), 10u);
  EXPECT_FALSE(std::isnan(em_cascade_step_macro(cascade, 0, "knn")));
  EXPECT_TRUE(std::isnan(em_cascade_step_macro(cascade, 0, "bogus")));
  char* paths = nullptr;
  ASSERT_EQ(em_cascade_write(cascade, dir.file("c").c_str(), &paths), EM_OK);
  EXPECT_NE(take(paths).find("accuracy_vs_k.csv"), std::string::npos);
  const uint64_t too_big[] = {100};
  em_cascade* bad = nullptr;
  EXPECT_EQ(em_cascade_run(ds, split, too_big, 1, 5, &params, &bad), EM_ERR_SCHEDULE_EXCEEDS_GENE_COUNT);

  em_cascade_free(cascade);
  em_ranking_free(c);
  em_ranking_free(b);
  em_ranking_free(a);
  em_model_free(gbm);
  em_model_free(rf);
  em_split_free(split);
  em_dataset_free(ds);
}

TEST(CApi, IngestTsv) {
  Scratch dir;
  {
    std::ofstream e(dir.file("e.tsv"));
    e << "SAMPLE_ID\tGENE_NAME\tZ_SCORE\n";
    e << "S1\tg1\t2.41\nS1\tg2\t0.5\nS2\tg1\t-1.20\nS2\tg2\tNA\nS3\tg1\t0.1\nS3\tg2\t0.2\n";
    std::ofstream m(dir.file("m.tsv"));
    m << "SAMPLE_ID\tPRIMARY_SITE\tHISTOLOGY_SUBTYPE\n" << "S1\tLung\tAdeno\nS2\tProstate\tAdeno\n";
  }
  em_dataset* ds = nullptr;
  em_ingest_summary summary{};
  char* json = nullptr;
  ASSERT_EQ(em_ingest(dir.file("e.tsv").c_str(), dir.file("m.tsv").c_str(), &ds, &summary, &json), EM_OK)
      << em_last_error();
  const std::string text = take(json);
  EXPECT_EQ(summary.records, 6u);
  EXPECT_EQ(summary.retained_samples, 2u);
  EXPECT_EQ(summary.genes_retained, 1u);
  EXPECT_EQ(summary.dropped_genes, 1u);
  EXPECT_EQ(summary.dropped_unlabeled_samples, 1u);
  EXPECT_NE(text.find("g2"), std::string::npos);
  EXPECT_EQ(em_dataset_rows(ds), 2u);
  EXPECT_STREQ(em_dataset_gene_name(ds, 0), "g1");
  em_dataset_free(ds);
}
