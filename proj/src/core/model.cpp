#include "expressml/model.hpp"

#include <algorithm>
#include <cctype>

#include "expressml/binary_io.hpp"
#include "expressml/error.hpp"

namespace expressml {

namespace {

constexpr std::string_view kModelMagic = "EXMM";

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void write_knn(ByteWriter& out, const KnnModel& model) {
  out.u64(model.k);
  out.u64(dataset_fingerprint(*model.data));
  out.u64(model.train_rows.size());
  for (std::size_t r : model.train_rows) out.u64(r);
}

KnnModel read_knn(ByteReader& in, std::shared_ptr<const LabeledMatrix> dataset) {
  const std::uint64_t k = in.u64();
  const std::uint64_t fingerprint = in.u64();
  const std::uint64_t count = in.u64();
  if (count > in.remaining() / 8) throw Error(ErrorCode::TruncatedFile, "KNN row table");
  std::vector<std::size_t> rows(count);
  for (auto& r : rows) r = in.u64();
  if (!dataset) throw Error(ErrorCode::InvalidArgument, "a KNN model needs its training dataset to be loaded");
  if (dataset_fingerprint(*dataset) != fingerprint) {
    throw Error(ErrorCode::DatasetMismatch, "dataset fingerprint " + hex64(dataset_fingerprint(*dataset)) +
                                                " does not match the KNN model's " + hex64(fingerprint));
  }
  return train_knn(std::move(dataset), rows, KnnParams{k});
}

std::size_t features_of(const KnnModel& m) { return m.data->cols(); }
template <typename M>
std::size_t features_of(const M& m) {
  return m.features;
}

}  // namespace

const char* to_string(ModelFamily family) noexcept {
  switch (family) {
    case ModelFamily::RF: return "RF";
    case ModelFamily::GBM: return "GBM";
    case ModelFamily::RFERN: return "RFERN";
    case ModelFamily::SVM: return "SVM";
    case ModelFamily::KNN: return "KNN";
  }
  return "?";
}

std::optional<ModelFamily> parse_family(std::string_view name) noexcept {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  for (ModelFamily f : kAllFamilies) {
    if (upper == to_string(f)) return f;
  }
  return std::nullopt;
}

void TrainConfig::set_seed(std::uint64_t seed) {
  forest.seed = seed;
  gbm.seed = seed;
  ferns.seed = seed;
  linear.seed = seed;
}

TrainedModel::TrainedModel(std::vector<std::string> class_names, std::vector<std::string> gene_names, Body body)
    : class_names_(std::move(class_names)), gene_names_(std::move(gene_names)), body_(std::move(body)) {}

ModelFamily TrainedModel::family() const noexcept {
  return std::visit(Overloaded{[](const ForestModel&) { return ModelFamily::RF; },
                               [](const GbmModel&) { return ModelFamily::GBM; },
                               [](const FernsModel&) { return ModelFamily::RFERN; },
                               [](const LinearOvrModel&) { return ModelFamily::SVM; },
                               [](const KnnModel&) { return ModelFamily::KNN; }},
                    body_);
}

std::uint32_t TrainedModel::predict(std::span<const float> sample) const {
  return std::visit(Overloaded{[&](const ForestModel& m) { return predict_forest(m, sample).label; },
                               [&](const GbmModel& m) { return predict_gbm(m, sample); },
                               [&](const FernsModel& m) { return predict_ferns(m, sample).label; },
                               [&](const LinearOvrModel& m) { return predict_linear(m, sample).label; },
                               [&](const KnnModel& m) { return predict_knn(m, sample).label; }},
                    body_);
}

std::optional<ImportanceRanking> TrainedModel::importance() const {
  if (const auto* rf = std::get_if<ForestModel>(&body_)) return forest_importance(*rf, gene_names_);
  if (const auto* gbm = std::get_if<GbmModel>(&body_)) return gbm_importance(*gbm, gene_names_);
  return std::nullopt;
}

TrainedModel train_model(std::shared_ptr<const LabeledMatrix> data, std::span<const std::size_t> rows,
                         ModelFamily family, const TrainConfig& config, unsigned workers) {
  if (!data) throw Error(ErrorCode::InvalidArgument, "no training data");
  for (std::size_t r : rows) {
    if (r >= data->rows()) throw Error(ErrorCode::InvalidArgument, "training row out of range");
  }
  const LabeledMatrix& m = *data;
  auto body = [&]() -> TrainedModel::Body {
    switch (family) {
      case ModelFamily::RF: return train_forest(m, rows, config.forest, workers);
      case ModelFamily::GBM: return train_gbm(m, rows, config.gbm, workers);
      case ModelFamily::RFERN: return train_ferns(m, rows, config.ferns, workers);
      case ModelFamily::SVM: return train_linear_ovr(m, rows, config.linear, workers);
      case ModelFamily::KNN: return train_knn(data, rows, config.knn);
    }
    throw Error(ErrorCode::InvalidParams, "unknown model family");
  }();
  return TrainedModel(m.class_names(), m.gene_names(), std::move(body));
}

std::vector<std::uint8_t> encode_model(const TrainedModel& model) {
  ByteWriter out;
  out.magic(kModelMagic);
  out.u32(kModelFormatVersion);
  out.u32(static_cast<std::uint32_t>(model.family()));
  out.u32(static_cast<std::uint32_t>(model.class_names().size()));
  for (const auto& name : model.class_names()) out.str(name);
  out.u64(model.gene_names().size());
  for (const auto& name : model.gene_names()) out.str(name);
  std::visit(Overloaded{[&](const ForestModel& m) { write_forest(out, m); },
                        [&](const GbmModel& m) { write_gbm(out, m); },
                        [&](const FernsModel& m) { write_ferns(out, m); },
                        [&](const LinearOvrModel& m) { write_linear(out, m); },
                        [&](const KnnModel& m) { write_knn(out, m); }},
             model.body());
  out.seal();
  return out.take();
}

TrainedModel decode_model(std::span<const std::uint8_t> bytes, std::shared_ptr<const LabeledMatrix> dataset) {
  ByteReader in(bytes);
  in.open_sealed(kModelMagic);
  const std::uint32_t version = in.u32();
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "model container version " + std::to_string(version) + ", expected " +
                                                std::to_string(kModelFormatVersion));
  }
  const std::uint32_t tag = in.u32();
  const std::uint32_t class_count = in.u32();
  if (class_count > in.remaining() / 4) throw Error(ErrorCode::TruncatedFile, "model class table");
  std::vector<std::string> class_names(class_count);
  for (auto& name : class_names) name = in.str();
  const std::uint64_t gene_count = in.u64();
  if (gene_count > in.remaining() / 4) throw Error(ErrorCode::TruncatedFile, "model gene table");
  std::vector<std::string> gene_names(gene_count);
  for (auto& name : gene_names) name = in.str();

  TrainedModel::Body body;
  try {
    switch (static_cast<ModelFamily>(tag)) {
      case ModelFamily::RF: body = read_forest(in); break;
      case ModelFamily::GBM: body = read_gbm(in); break;
      case ModelFamily::RFERN: body = read_ferns(in); break;
      case ModelFamily::SVM: body = read_linear(in); break;
      case ModelFamily::KNN: {
        // Check the checksum before hashing the (possibly large) dataset.
        in.check_checksum();
        body = read_knn(in, std::move(dataset));
        break;
      }
      default: throw Error(ErrorCode::BadMagic, "unknown model family tag " + std::to_string(tag));
    }
  } catch (const Error& e) {
    // A corrupted body can fail structurally before the CRC is looked at;
    // report the corruption rather than its symptom. Short files stay TruncatedFile.
    if (e.code() != ErrorCode::TruncatedFile && !in.checksum_ok()) in.check_checksum();
    throw;
  }
  in.expect_end();
  if (std::visit([](const auto& m) { return features_of(m); }, body) != gene_names.size()) {
    throw Error(ErrorCode::InvalidArgument, "model payload width does not match its gene table");
  }
  return TrainedModel(std::move(class_names), std::move(gene_names), std::move(body));
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) { write_file(path, encode_model(model)); }

TrainedModel load_model(const std::filesystem::path& path, std::shared_ptr<const LabeledMatrix> dataset) {
  return decode_model(read_file(path), std::move(dataset));
}

}  // namespace expressml
