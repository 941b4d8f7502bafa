#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "expressml/dataset.hpp"

namespace expressml {

/// One long-format row: (sample, gene, z-score). NA cells have no score.
struct ExpressionRecord {
  std::string sample_id;
  std::string gene_name;
  std::optional<float> z_score;

  friend bool operator==(const ExpressionRecord&, const ExpressionRecord&) = default;
};

/// Chunked byte source behind the line reader.
class ByteSource {
 public:
  virtual ~ByteSource() = default;
  /// Returns bytes read; 0 at end of input.
  virtual std::size_t read(char* buffer, std::size_t capacity) = 0;
};

std::unique_ptr<ByteSource> make_stream_source(std::istream& in);
/// Opens a plain or gzip-compressed file.
std::unique_ptr<ByteSource> make_file_source(const std::filesystem::path& path);

/// Splits a byte source into lines, accepting '\n' and "\r\n" endings.
class LineReader {
 public:
  explicit LineReader(std::unique_ptr<ByteSource> source, std::size_t chunk_bytes = 1 << 16);

  /// The view stays valid until the next call.
  std::optional<std::string_view> next();
  /// 1-based number of the line last returned.
  std::size_t line_number() const noexcept { return line_number_; }

 private:
  bool refill();

  std::unique_ptr<ByteSource> source_;
  std::vector<char> buffer_;
  std::size_t begin_ = 0;
  std::size_t end_ = 0;
  bool eof_ = false;
  std::size_t line_number_ = 0;
};

/// Recognizes "", "NA", "NULL" (any case) as a missing value.
bool is_na_token(std::string_view field) noexcept;

/// Single-pass reader over the expression TSV. The header row is consumed on
/// construction; memory use is one chunk plus the current row.
class ExpressionReader {
 public:
  explicit ExpressionReader(std::unique_ptr<ByteSource> source);

  /// Fills `record` with the next data row; false at end of input.
  bool next(ExpressionRecord& record);
  std::size_t line_number() const noexcept { return lines_.line_number(); }

 private:
  LineReader lines_;
};

/// sample id -> canonical class label "primary_site/histology_subtype".
using SampleLabels = std::map<std::string, std::string, std::less<>>;

SampleLabels parse_sample_metadata(std::unique_ptr<ByteSource> source);

struct IngestSummary {
  std::size_t records = 0;
  std::size_t genes_observed = 0;
  std::size_t genes_retained = 0;
  std::vector<std::string> dropped_genes;
  std::size_t dropped_unlabeled_samples = 0;
  std::size_t duplicate_cells = 0;
  /// Sample ids of the matrix rows, in row order.
  std::vector<std::string> retained_samples;
};

struct IngestResult {
  LabeledMatrix matrix;
  IngestSummary summary;
};

/// Long-to-wide pivot. Records may arrive in any order; cells are staged in
/// fixed-size per-sample blocks so memory tracks the observed grid rather
/// than the record count.
class PivotBuilder {
 public:
  PivotBuilder();
  ~PivotBuilder();
  PivotBuilder(PivotBuilder&&) noexcept;
  PivotBuilder& operator=(PivotBuilder&&) noexcept;

  /// Throws DuplicateCell when (sample, gene) was already added.
  void add(const ExpressionRecord& record);

  /// Joins with the metadata, drops any gene lacking a finite value in some
  /// retained sample, and sorts rows by sample id and columns by gene name.
  /// Consumes the staged cells.
  IngestResult finish(const SampleLabels& labels);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

IngestResult build_matrix(ExpressionReader& records, const SampleLabels& labels);

IngestResult ingest_files(const std::filesystem::path& expression_tsv, const std::filesystem::path& sample_tsv);

}  // namespace expressml
