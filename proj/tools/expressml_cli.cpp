// expressml command-line front end. Talks to the library only through the C API.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "expressml/expressml.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

/// Thrown for library failures; carries the library's message.
struct DataError {
  std::string message;
};

/// Thrown for bad paths or flag combinations found after parsing.
struct UsageError {
  std::string message;
};

void check(em_status status) {
  if (status != EM_OK) throw DataError{em_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr); }
  T** out() { return &ptr; }
  T* get() const { return ptr; }
};

using Dataset = Handle<em_dataset, em_dataset_free>;
using Split = Handle<em_split, em_split_free>;
using Model = Handle<em_model, em_model_free>;
using Report = Handle<em_report, em_report_free>;
using Ranking = Handle<em_ranking, em_ranking_free>;
using Cascade = Handle<em_cascade, em_cascade_free>;

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { em_string_free(ptr); }
  char** out() { return &ptr; }
  std::string str() const { return ptr ? ptr : ""; }
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_hash(const std::string& path) {
  std::uint64_t h = 0;
  check(em_file_hash(path.c_str(), &h));
  return hex(h);
}

void require_input(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw UsageError{std::string(what) + " not found: " + path};
}

void require_output(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw UsageError{"output directory does not exist: " + parent.string()};
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError{"Io: cannot write " + path};
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Collects what a run consumed and produced; written next to the primary output.
struct Manifest {
  std::string subcommand;
  std::vector<std::string> argv;
  json config = json::object();
  json seeds = json::object();
  std::optional<std::uint64_t> dataset_fingerprint;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  json timings = json::object();

  void write(const std::string& path) const {
    json in = json::object();
    for (const auto& p : inputs) in[p] = file_hash(p);
    json out = json::object();
    for (const auto& p : outputs) out[p] = file_hash(p);
    json doc{{"argv", argv},
             {"config", config},
             {"format", "expressml-run-manifest"},
             {"inputs", in},
             {"outputs", out},
             {"seeds", seeds},
             {"subcommand", subcommand},
             {"timings", timings},
             {"version", em_version()}};
    doc["dataset_fingerprint"] = dataset_fingerprint ? json(hex(*dataset_fingerprint)) : json(nullptr);
    write_text(path, doc.dump(2) + "\n");
  }
};

std::string manifest_path(const std::string& primary) { return primary + ".manifest.json"; }

json params_json(const em_train_params& p) {
  return json{{"seed", p.seed},
              {"rf_trees", p.rf_trees},
              {"rf_mtry", p.rf_mtry},
              {"rf_max_depth", p.rf_max_depth},
              {"rf_min_leaf", p.rf_min_leaf},
              {"gbm_rounds", p.gbm_rounds},
              {"gbm_shrinkage", p.gbm_shrinkage},
              {"gbm_depth", p.gbm_depth},
              {"gbm_subsample", p.gbm_subsample},
              {"fern_count", p.fern_count},
              {"fern_depth", p.fern_depth},
              {"svm_lambda", p.svm_lambda},
              {"svm_epochs", p.svm_epochs},
              {"knn_k", p.knn_k}};
}

void add_train_flags(CLI::App* cmd, em_train_params& p) {
  cmd->add_option("--trees", p.rf_trees, "RF: number of trees")->check(CLI::PositiveNumber);
  cmd->add_option("--mtry", p.rf_mtry, "RF: genes tried per split (0 = floor(sqrt(genes)))");
  cmd->add_option("--max-depth", p.rf_max_depth, "RF: depth limit (-1 = unlimited)");
  cmd->add_option("--min-leaf", p.rf_min_leaf, "RF: minimum samples per leaf")->check(CLI::PositiveNumber);
  cmd->add_option("--rounds", p.gbm_rounds, "GBM: boosting rounds")->check(CLI::PositiveNumber);
  cmd->add_option("--shrinkage", p.gbm_shrinkage, "GBM: learning rate");
  cmd->add_option("--tree-depth", p.gbm_depth, "GBM: depth of each regression tree")->check(CLI::PositiveNumber);
  cmd->add_option("--subsample", p.gbm_subsample, "GBM: row fraction per round");
  cmd->add_option("--ferns", p.fern_count, "RFERN: number of ferns")->check(CLI::PositiveNumber);
  cmd->add_option("--fern-depth", p.fern_depth, "RFERN: tests per fern")->check(CLI::PositiveNumber);
  cmd->add_option("--lambda", p.svm_lambda, "SVM: regularization strength");
  cmd->add_option("--epochs", p.svm_epochs, "SVM: passes over the data")->check(CLI::PositiveNumber);
  cmd->add_option("--k", p.knn_k, "KNN: neighbours")->check(CLI::PositiveNumber);
}

unsigned resolve_workers(const CLI::Option* flag, unsigned value) {
  if (flag->count() > 0) return value == 0 ? 1 : value;
  if (const char* env = std::getenv("EXPRESSML_WORKERS")) {
    try {
      const unsigned long n = std::stoul(env);
      if (n > 0) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    throw UsageError{std::string("EXPRESSML_WORKERS must be a positive integer, got ") + env};
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct Options {
  // shared
  std::string dataset, split, out, out_prefix, model;
  std::uint64_t seed = 42;
  unsigned workers = 1;
  double fraction = 0.75;
  // ingest
  std::string expression, metadata, summary;
  // synth
  em_synth_spec synth{};
  std::string planted;
  // train
  std::string family;
  em_train_params params{};
  // select
  std::string rf_model, gbm_model;
  std::size_t top = 20;
  // cascade
  std::vector<std::uint64_t> schedule{80, 60, 40, 20, 10};
};

int run_ingest(const Options& o, Manifest& m) {
  require_input(o.expression, "expression file");
  require_input(o.metadata, "metadata file");
  require_output(o.out);
  const std::string summary_path = o.summary.empty() ? o.out + ".summary.json" : o.summary;
  require_output(summary_path);

  const auto start = std::chrono::steady_clock::now();
  Dataset ds;
  em_ingest_summary s{};
  OwnedString summary;
  check(em_ingest(o.expression.c_str(), o.metadata.c_str(), ds.out(), &s, summary.out()));
  check(em_dataset_save(ds.get(), o.out.c_str()));
  write_text(summary_path, summary.str());
  const double elapsed = seconds_since(start);

  std::printf("records %llu, genes %llu observed / %llu retained (%llu dropped), samples %llu retained "
              "(%llu unlabeled dropped), duplicate cells %llu\n",
              static_cast<unsigned long long>(s.records), static_cast<unsigned long long>(s.genes_observed),
              static_cast<unsigned long long>(s.genes_retained), static_cast<unsigned long long>(s.dropped_genes),
              static_cast<unsigned long long>(s.retained_samples),
              static_cast<unsigned long long>(s.dropped_unlabeled_samples),
              static_cast<unsigned long long>(s.duplicate_cells));
  std::printf("matrix %zu x %zu, %zu classes -> %s\n", em_dataset_rows(ds.get()), em_dataset_cols(ds.get()),
              em_dataset_classes(ds.get()), o.out.c_str());

  m.config = {{"expression", o.expression}, {"metadata", o.metadata}, {"out", o.out}, {"summary", summary_path}};
  m.dataset_fingerprint = em_dataset_fingerprint(ds.get());
  m.inputs = {o.expression, o.metadata};
  m.outputs = {o.out, summary_path};
  m.timings = {{"ingest_seconds", elapsed}};
  m.write(manifest_path(o.out));
  return 0;
}

int run_split(const Options& o, Manifest& m) {
  require_input(o.dataset, "dataset");
  require_output(o.out);
  Dataset ds;
  check(em_dataset_load(o.dataset.c_str(), ds.out()));
  Split sp;
  check(em_split_make(ds.get(), o.fraction, o.seed, sp.out()));
  check(em_split_save(sp.get(), ds.get(), o.out.c_str()));
  std::printf("seed %llu\n", static_cast<unsigned long long>(o.seed));
  std::printf("train %zu, test %zu -> %s\n", em_split_train_count(sp.get()), em_split_test_count(sp.get()),
              o.out.c_str());

  m.config = {{"dataset", o.dataset}, {"fraction", o.fraction}, {"out", o.out}};
  m.seeds = {{"split", o.seed}};
  m.dataset_fingerprint = em_dataset_fingerprint(ds.get());
  m.inputs = {o.dataset};
  m.outputs = {o.out};
  m.write(manifest_path(o.out));
  return 0;
}

int run_synth(const Options& o, Manifest& m) {
  require_output(o.out);
  const std::string planted_path = o.planted.empty() ? o.out + ".planted.txt" : o.planted;
  require_output(planted_path);
  em_synth_spec spec = o.synth;
  spec.seed = o.seed;
  Dataset ds;
  OwnedString planted;
  check(em_synthesize(&spec, ds.out(), planted.out()));
  check(em_dataset_save(ds.get(), o.out.c_str()));
  write_text(planted_path, planted.str());
  std::printf("seed %llu\n", static_cast<unsigned long long>(o.seed));
  std::printf("matrix %zu x %zu, %zu classes -> %s (planted genes: %s)\n", em_dataset_rows(ds.get()),
              em_dataset_cols(ds.get()), em_dataset_classes(ds.get()), o.out.c_str(), planted_path.c_str());

  m.config = {{"classes", spec.classes},
              {"samples_per_class", spec.samples_per_class},
              {"genes", spec.genes},
              {"informative", spec.informative_genes},
              {"effect_size", spec.effect_size},
              {"noise_sd", spec.noise_sd},
              {"out", o.out},
              {"planted", planted_path}};
  m.seeds = {{"synth", o.seed}};
  m.dataset_fingerprint = em_dataset_fingerprint(ds.get());
  m.outputs = {o.out, planted_path};
  m.write(manifest_path(o.out));
  return 0;
}

int run_train(const Options& o, Manifest& m) {
  require_input(o.dataset, "dataset");
  require_input(o.split, "split file");
  require_output(o.out);
  Dataset ds;
  check(em_dataset_load(o.dataset.c_str(), ds.out()));
  Split sp;
  check(em_split_load(o.split.c_str(), ds.get(), sp.out()));
  em_train_params p = o.params;
  p.seed = o.seed;
  p.workers = o.workers;
  Model model;
  double train_seconds = 0.0;
  check(em_train(ds.get(), sp.get(), o.family.c_str(), &p, model.out(), &train_seconds));
  check(em_model_save(model.get(), o.out.c_str()));
  std::printf("seed %llu\n", static_cast<unsigned long long>(o.seed));
  std::printf("%s trained on %zu rows x %zu genes in %.3f s (workers %u) -> %s\n", em_model_family(model.get()),
              em_split_train_count(sp.get()), em_model_gene_count(model.get()), train_seconds, o.workers,
              o.out.c_str());

  m.config = {{"dataset", o.dataset}, {"split", o.split}, {"model", em_model_family(model.get())},
              {"out", o.out},         {"params", params_json(p)}};
  m.seeds = {{"train", o.seed}, {"split", em_split_seed(sp.get())}};
  m.dataset_fingerprint = em_dataset_fingerprint(ds.get());
  m.inputs = {o.dataset, o.split};
  m.outputs = {o.out};
  m.timings = {{"train_seconds", train_seconds}, {"workers", o.workers}};
  m.write(manifest_path(o.out));
  return 0;
}

/// Training time recorded by the `train` run that produced `model_path`, if any.
std::optional<double> recorded_train_seconds(const std::string& model_path) {
  const std::string path = manifest_path(model_path);
  if (!fs::is_regular_file(path)) return std::nullopt;
  try {
    const json doc = json::parse(read_text(path));
    return doc.at("timings").at("train_seconds").get<double>();
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

int run_evaluate(const Options& o, Manifest& m) {
  require_input(o.model, "model");
  require_input(o.dataset, "dataset");
  require_input(o.split, "split file");
  require_output(o.out_prefix + ".report.json");
  Dataset ds;
  check(em_dataset_load(o.dataset.c_str(), ds.out()));
  Split sp;
  check(em_split_load(o.split.c_str(), ds.get(), sp.out()));
  Model model;
  check(em_model_load(o.model.c_str(), ds.get(), model.out()));
  Report report;
  check(em_evaluate(model.get(), ds.get(), sp.get(), o.workers, report.out()));
  const std::optional<double> train_seconds = recorded_train_seconds(o.model);
  if (train_seconds) em_report_set_train_seconds(report.get(), *train_seconds);
  OwnedString table, paths;
  check(em_report_table(report.get(), table.out()));
  check(em_report_write(report.get(), o.out_prefix.c_str(), paths.out()));
  std::fputs(table.str().c_str(), stdout);
  std::printf("test %.3f s\n", em_report_test_seconds(report.get()));

  m.config = {{"model", o.model}, {"dataset", o.dataset}, {"split", o.split}, {"out_prefix", o.out_prefix}};
  m.seeds = {{"split", em_split_seed(sp.get())}};
  m.dataset_fingerprint = em_dataset_fingerprint(ds.get());
  m.inputs = {o.model, o.dataset, o.split};
  m.outputs = lines_of(paths.str());
  m.timings = {{"Average training time (s)", train_seconds ? json(*train_seconds) : json(nullptr)},
               {"Testing time (s)", em_report_test_seconds(report.get())},
               {"workers", o.workers}};
  m.write(o.out_prefix + ".manifest.json");
  return 0;
}

int run_select(const Options& o, Manifest& m) {
  require_input(o.rf_model, "RF model");
  require_input(o.gbm_model, "GBM model");
  require_output(o.out);
  Model rf, gbm;
  check(em_model_load(o.rf_model.c_str(), nullptr, rf.out()));
  check(em_model_load(o.gbm_model.c_str(), nullptr, gbm.out()));
  if (std::string(em_model_family(rf.get())) != "RF") throw UsageError{"--rf-model is not an RF model"};
  if (std::string(em_model_family(gbm.get())) != "GBM") throw UsageError{"--gbm-model is not a GBM model"};
  Ranking rf_rank, gbm_rank, combined;
  check(em_model_importance(rf.get(), rf_rank.out()));
  check(em_model_importance(gbm.get(), gbm_rank.out()));
  check(em_combine_rankings(rf_rank.get(), gbm_rank.get(), combined.out()));
  check(em_ranking_write_csv(combined.get(), o.out.c_str()));
  const std::size_t shown = std::min(o.top, em_ranking_size(combined.get()));
  for (std::size_t i = 0; i < shown; ++i) {
    std::printf("%3zu  %-24s %.6f\n", i + 1, em_ranking_gene(combined.get(), i), em_ranking_score(combined.get(), i));
  }
  m.config = {{"rf_model", o.rf_model}, {"gbm_model", o.gbm_model}, {"out", o.out}};
  m.inputs = {o.rf_model, o.gbm_model};
  m.outputs = {o.out};
  m.write(manifest_path(o.out));
  return 0;
}

int run_cascade(const Options& o, Manifest& m) {
  require_input(o.dataset, "dataset");
  if (!o.split.empty()) require_input(o.split, "split file");
  require_output(o.out_prefix + ".cascade.json");
  Dataset ds;
  check(em_dataset_load(o.dataset.c_str(), ds.out()));
  Split sp;
  if (o.split.empty()) {
    check(em_split_make(ds.get(), o.fraction, o.seed, sp.out()));
  } else {
    check(em_split_load(o.split.c_str(), ds.get(), sp.out()));
  }
  em_train_params p = o.params;
  p.seed = o.seed;
  p.workers = o.workers;
  const auto start = std::chrono::steady_clock::now();
  Cascade cascade;
  check(em_cascade_run(ds.get(), sp.get(), o.schedule.data(), o.schedule.size(), o.top, &p, cascade.out()));
  OwnedString table, paths;
  check(em_cascade_table(cascade.get(), table.out()));
  check(em_cascade_write(cascade.get(), o.out_prefix.c_str(), paths.out()));
  const double elapsed = seconds_since(start);
  std::printf("seed %llu\n", static_cast<unsigned long long>(o.seed));
  std::fputs(table.str().c_str(), stdout);

  m.config = {{"dataset", o.dataset},   {"split", o.split.empty() ? json(nullptr) : json(o.split)},
              {"fraction", o.fraction}, {"schedule", o.schedule},
              {"top_genes", o.top},     {"out_prefix", o.out_prefix},
              {"params", params_json(p)}};
  m.seeds = {{"train", o.seed}, {"split", em_split_seed(sp.get())}};
  m.dataset_fingerprint = em_dataset_fingerprint(ds.get());
  m.inputs = {o.dataset};
  if (!o.split.empty()) m.inputs.push_back(o.split);
  m.outputs = lines_of(paths.str());
  m.timings = {{"cascade_seconds", elapsed}, {"workers", o.workers}};
  m.write(o.out_prefix + ".manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cancer-type classification from gene expression z-scores", "expressml"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  Options o;
  em_synth_spec_defaults(&o.synth);
  em_train_params_defaults(&o.params);

  auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", o.seed, "random seed"); };
  std::vector<std::pair<CLI::App*, CLI::Option*>> worker_flags;
  auto add_workers = [&](CLI::App* cmd) {
    worker_flags.emplace_back(cmd, cmd->add_option("--workers", o.workers, "worker threads (falls back to EXPRESSML_WORKERS)"));
  };

  auto* ingest = app.add_subcommand("ingest", "long-format expression TSV + sample metadata -> dataset container");
  ingest->add_option("--expression", o.expression, "sample/gene/z-score TSV, optionally gzipped")->required();
  ingest->add_option("--metadata", o.metadata, "sample metadata TSV")->required();
  ingest->add_option("--out", o.out, "dataset container to write")->required();
  ingest->add_option("--summary", o.summary, "ingest summary JSON (default <out>.summary.json)");

  auto* split = app.add_subcommand("split", "stratified train/test split of a dataset");
  split->add_option("--dataset", o.dataset, "dataset container")->required();
  split->add_option("--fraction", o.fraction, "training fraction")->check(CLI::Range(0.0, 1.0));
  split->add_option("--out", o.out, "split file to write")->required();
  add_seed(split);

  auto* synth = app.add_subcommand("synth", "planted-signal synthetic dataset");
  synth->add_option("--classes", o.synth.classes, "number of classes");
  synth->add_option("--samples-per-class", o.synth.samples_per_class, "samples per class");
  synth->add_option("--genes", o.synth.genes, "number of genes");
  synth->add_option("--informative", o.synth.informative_genes, "planted informative genes");
  synth->add_option("--effect-size", o.synth.effect_size, "class mean shift on planted genes");
  synth->add_option("--noise-sd", o.synth.noise_sd, "noise standard deviation");
  synth->add_option("--out", o.out, "dataset container to write")->required();
  synth->add_option("--planted", o.planted, "planted gene list (default <out>.planted.txt)");
  add_seed(synth);

  auto* train = app.add_subcommand("train", "train one model family");
  train->add_option("--dataset", o.dataset, "dataset container")->required();
  train->add_option("--split", o.split, "split file")->required();
  train->add_option("--model", o.family, "rf | gbm | rfern | svm | knn")
      ->required()
      ->check(CLI::IsMember({"rf", "gbm", "rfern", "svm", "knn"}, CLI::ignore_case));
  train->add_option("--out", o.out, "model container to write")->required();
  add_train_flags(train, o.params);
  add_seed(train);
  add_workers(train);

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a model on the split's test rows");
  evaluate->add_option("--model", o.model, "model container")->required();
  evaluate->add_option("--dataset", o.dataset, "dataset container")->required();
  evaluate->add_option("--split", o.split, "split file")->required();
  evaluate->add_option("--out-prefix", o.out_prefix, "prefix for report files")->required();
  add_workers(evaluate);

  auto* select = app.add_subcommand("select", "combined RF + GBM importance ranking");
  select->add_option("--rf-model", o.rf_model, "RF model container")->required();
  select->add_option("--gbm-model", o.gbm_model, "GBM model container")->required();
  select->add_option("--out", o.out, "ranking CSV to write")->required();
  select->add_option("--top", o.top, "genes to print");

  auto* cascade = app.add_subcommand("cascade", "feature-selection cascade over all five families");
  cascade->add_option("--dataset", o.dataset, "dataset container")->required();
  cascade->add_option("--split", o.split, "split file (default: a fresh split from --fraction and --seed)");
  cascade->add_option("--fraction", o.fraction, "training fraction when no split file is given")
      ->check(CLI::Range(0.0, 1.0));
  cascade->add_option("--schedule", o.schedule, "gene counts, strictly decreasing")->delimiter(',');
  cascade->add_option("--top-genes", o.top, "rows in the selected-gene table");
  cascade->add_option("--out-prefix", o.out_prefix, "prefix for cascade files")->required();
  add_train_flags(cascade, o.params);
  add_seed(cascade);
  add_workers(cascade);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto chosen = app.get_subcommands();
    std::cerr << (chosen.empty() ? app.help() : chosen.front()->help());
    return kExitUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  Manifest manifest;
  manifest.subcommand = chosen->get_name();
  manifest.argv.assign(argv + 1, argv + argc);

  try {
    for (const auto& [cmd, flag] : worker_flags) {
      if (cmd == chosen) o.workers = resolve_workers(flag, o.workers);
    }
    if (chosen == ingest) return run_ingest(o, manifest);
    if (chosen == split) return run_split(o, manifest);
    if (chosen == synth) return run_synth(o, manifest);
    if (chosen == train) return run_train(o, manifest);
    if (chosen == evaluate) return run_evaluate(o, manifest);
    if (chosen == select) return run_select(o, manifest);
    if (chosen == cascade) return run_cascade(o, manifest);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.message << "\n\n" << chosen->help();
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.message << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
