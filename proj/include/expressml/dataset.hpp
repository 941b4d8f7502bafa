#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace expressml {

/// Dense samples x genes z-score matrix with one class label per row.
/// Sample identifiers are not part of the matrix; ingest reports them.
///
/// Rows are samples, columns are genes. Gene names are unique and sorted;
/// class names are sorted and `row_class[i]` indexes into them. Values are
/// stored row-major in 32-bit floats.
class LabeledMatrix {
 public:
  LabeledMatrix() = default;

  /// Validates every invariant; throws InvalidArgument on violation.
  LabeledMatrix(std::vector<float> values, std::vector<std::string> gene_names, std::vector<std::string> class_names,
                std::vector<std::uint32_t> row_class);

  std::size_t rows() const noexcept { return row_class_.size(); }
  std::size_t cols() const noexcept { return gene_names_.size(); }
  std::size_t classes() const noexcept { return class_names_.size(); }

  std::span<const float> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols(), cols()};
  }
  float at(std::size_t r, std::size_t c) const noexcept { return values_[r * cols() + c]; }

  std::span<const float> values() const noexcept { return values_; }
  const std::vector<std::string>& gene_names() const noexcept { return gene_names_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  const std::vector<std::uint32_t>& row_class() const noexcept { return row_class_; }
  std::uint32_t label(std::size_t r) const noexcept { return row_class_[r]; }

  /// Index of `name` in class_names(), or -1.
  std::int64_t class_index(std::string_view name) const noexcept;
  /// Index of `name` in gene_names(), or -1.
  std::int64_t gene_index(std::string_view name) const noexcept;

  /// Keeps only the listed columns (any order); result columns are re-sorted
  /// by gene name so the sorted-names invariant holds.
  LabeledMatrix select_columns(std::span<const std::size_t> columns) const;

  friend bool operator==(const LabeledMatrix&, const LabeledMatrix&) = default;

 private:
  std::vector<float> values_;
  std::vector<std::string> gene_names_;
  std::vector<std::string> class_names_;
  std::vector<std::uint32_t> row_class_;
};

struct SplitIndices {
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  std::uint64_t seed = 0;
  double fraction = 0.75;

  friend bool operator==(const SplitIndices&, const SplitIndices&) = default;
};

/// Stratified split. Each class first receives floor(fraction * n_c) training
/// slots; the remaining slots up to floor(fraction * n) go to the classes with
/// the largest fractional remainders (ties: lower class index). Membership
/// within a class is a seeded shuffle.
SplitIndices stratified_split(const LabeledMatrix& matrix, double fraction, std::uint64_t seed);

/// Split files are JSON documents tied to a dataset fingerprint.
void save_split(const SplitIndices& split, std::uint64_t dataset_fingerprint,
                const std::filesystem::path& path);
SplitIndices load_split(const std::filesystem::path& path, std::uint64_t expected_fingerprint);

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

std::vector<std::uint8_t> encode_dataset(const LabeledMatrix& matrix);
LabeledMatrix decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const LabeledMatrix& matrix, const std::filesystem::path& path);
LabeledMatrix load_dataset(const std::filesystem::path& path);

/// FNV-1a over the encoded container.
std::uint64_t dataset_fingerprint(const LabeledMatrix& matrix);

struct SynthSpec {
  std::size_t classes = 17;
  std::size_t samples_per_class = 40;
  std::size_t genes = 2000;
  std::size_t informative_genes = 50;
  double effect_size = 1.0;
  double noise_sd = 1.0;
  std::uint64_t seed = 42;
};

struct SyntheticData {
  LabeledMatrix matrix;
  /// Names of the planted informative genes, sorted.
  std::vector<std::string> planted_genes;
};

SyntheticData generate_synthetic(const SynthSpec& spec);

}  // namespace expressml
