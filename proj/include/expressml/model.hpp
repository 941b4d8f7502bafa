#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "expressml/boosting.hpp"
#include "expressml/dataset.hpp"
#include "expressml/ferns.hpp"
#include "expressml/forest.hpp"
#include "expressml/linear.hpp"
#include "expressml/neighbors.hpp"
#include "expressml/ranking.hpp"

namespace expressml {

/// Container family tags; the numeric values are part of the file format.
enum class ModelFamily : std::uint32_t { RF = 1, GBM = 2, RFERN = 3, SVM = 4, KNN = 5 };

inline constexpr ModelFamily kAllFamilies[] = {ModelFamily::RF, ModelFamily::GBM, ModelFamily::RFERN,
                                               ModelFamily::SVM, ModelFamily::KNN};

const char* to_string(ModelFamily family) noexcept;
/// Accepts "rf", "gbm", "rfern", "svm", "knn" in any case.
std::optional<ModelFamily> parse_family(std::string_view name) noexcept;

/// Hyperparameters for every family; each trainer reads its own block.
struct TrainConfig {
  ForestParams forest;
  GbmParams gbm;
  FernsParams ferns;
  LinearParams linear;
  KnnParams knn;

  /// Sets the seed of every seeded family.
  void set_seed(std::uint64_t seed);
};

class TrainedModel {
 public:
  using Body = std::variant<ForestModel, GbmModel, FernsModel, LinearOvrModel, KnnModel>;

  TrainedModel(std::vector<std::string> class_names, std::vector<std::string> gene_names, Body body);

  ModelFamily family() const noexcept;
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  const std::vector<std::string>& gene_names() const noexcept { return gene_names_; }
  const Body& body() const noexcept { return body_; }

  template <typename T>
  const T& as() const {
    return std::get<T>(body_);
  }

  /// Predicted class index into class_names().
  std::uint32_t predict(std::span<const float> sample) const;

  /// Impurity importance ranking; RF and GBM only.
  std::optional<ImportanceRanking> importance() const;

 private:
  std::vector<std::string> class_names_;
  std::vector<std::string> gene_names_;
  Body body_;
};

/// Trains `family` on `rows` of `data`. KNN keeps a reference to `data`.
TrainedModel train_model(std::shared_ptr<const LabeledMatrix> data, std::span<const std::size_t> rows,
                         ModelFamily family, const TrainConfig& config, unsigned workers = 1);

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// "EXMM" | version u32 | family u32 | class table | gene table | payload | CRC32.
std::vector<std::uint8_t> encode_model(const TrainedModel& model);
/// KNN payloads reference their training dataset by fingerprint and need it
/// passed in; other families ignore `dataset`.
TrainedModel decode_model(std::span<const std::uint8_t> bytes, std::shared_ptr<const LabeledMatrix> dataset = nullptr);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path, std::shared_ptr<const LabeledMatrix> dataset = nullptr);

}  // namespace expressml
