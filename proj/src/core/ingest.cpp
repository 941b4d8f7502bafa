#include "expressml/ingest.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

#include <zlib.h>

#include "expressml/error.hpp"

namespace expressml {

namespace {

class IstreamSource final : public ByteSource {
 public:
  explicit IstreamSource(std::istream& in) : in_(in) {}
  std::size_t read(char* buffer, std::size_t capacity) override {
    in_.read(buffer, static_cast<std::streamsize>(capacity));
    return static_cast<std::size_t>(in_.gcount());
  }

 private:
  std::istream& in_;
};

class GzFileSource final : public ByteSource {
 public:
  explicit GzFileSource(const std::filesystem::path& path) : file_(gzopen(path.c_str(), "rb")), path_(path) {
    if (file_ == nullptr) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
    gzbuffer(file_, 1 << 17);
  }
  ~GzFileSource() override { gzclose(file_); }
  GzFileSource(const GzFileSource&) = delete;
  GzFileSource& operator=(const GzFileSource&) = delete;

  std::size_t read(char* buffer, std::size_t capacity) override {
    const int got = gzread(file_, buffer, static_cast<unsigned>(std::min<std::size_t>(capacity, 1u << 30)));
    if (got < 0) throw Error(ErrorCode::Io, "read error in '" + path_.string() + "'");
    return static_cast<std::size_t>(got);
  }

 private:
  gzFile file_;
  std::filesystem::path path_;
};

std::string_view trim(std::string_view s) noexcept {
  constexpr std::string_view ws = " \t\r\n\v\f";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

/// Splits on '\t' into exactly three fields, or returns false.
bool split3(std::string_view line, std::array<std::string_view, 3>& fields) noexcept {
  std::size_t start = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t tab = line.find('\t', start);
    if (i < 2) {
      if (tab == std::string_view::npos) return false;
      fields[i] = line.substr(start, tab - start);
      start = tab + 1;
    } else {
      if (tab != std::string_view::npos) return false;
      fields[i] = line.substr(start);
    }
  }
  return true;
}

[[noreturn]] void malformed(std::size_t line, std::string_view why) {
  throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line) + ": " + std::string(why));
}

std::optional<float> parse_score(std::string_view raw, std::size_t line) {
  const std::string_view field = trim(raw);
  if (is_na_token(field)) return std::nullopt;
  std::string_view digits = field;
  if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
  float value = 0.0f;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || !std::isfinite(value)) {
    throw Error(ErrorCode::NonNumericScore,
                "line " + std::to_string(line) + ": '" + std::string(field) + "' is not a z-score");
  }
  return value;
}

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
};

using Interner = std::unordered_map<std::string, std::uint32_t, StringHash, std::equal_to<>>;

std::uint32_t intern(Interner& table, std::vector<std::string>& names, std::string_view key) {
  if (auto it = table.find(key); it != table.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names.size());
  names.emplace_back(key);
  table.emplace(names.back(), id);
  return id;
}

// Cell states are encoded as distinct quiet-NaN payloads; parsed scores are
// always finite, so they never collide with either marker.
constexpr std::uint32_t kUnobservedBits = 0x7fc00001u;
constexpr std::uint32_t kMissingBits = 0x7fc00002u;
constexpr std::size_t kBlockGenes = 64;

}  // namespace

std::unique_ptr<ByteSource> make_stream_source(std::istream& in) { return std::make_unique<IstreamSource>(in); }

std::unique_ptr<ByteSource> make_file_source(const std::filesystem::path& path) {
  return std::make_unique<GzFileSource>(path);
}

LineReader::LineReader(std::unique_ptr<ByteSource> source, std::size_t chunk_bytes)
    : source_(std::move(source)), buffer_(std::max<std::size_t>(chunk_bytes, 16)) {}

bool LineReader::refill() {
  if (eof_) return false;
  if (begin_ > 0) {
    std::memmove(buffer_.data(), buffer_.data() + begin_, end_ - begin_);
    end_ -= begin_;
    begin_ = 0;
  }
  if (end_ == buffer_.size()) buffer_.resize(buffer_.size() * 2);
  const std::size_t got = source_->read(buffer_.data() + end_, buffer_.size() - end_);
  if (got == 0) eof_ = true;
  end_ += got;
  return got > 0;
}

std::optional<std::string_view> LineReader::next() {
  std::size_t scan_from = begin_;
  for (;;) {
    const char* start = buffer_.data() + scan_from;
    const void* nl = std::memchr(start, '\n', end_ - scan_from);
    if (nl != nullptr) {
      const std::size_t pos = static_cast<const char*>(nl) - buffer_.data();
      std::string_view line(buffer_.data() + begin_, pos - begin_);
      begin_ = pos + 1;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      ++line_number_;
      return line;
    }
    const std::size_t scanned = end_ - begin_;
    if (!refill()) {
      if (begin_ == end_) return std::nullopt;
      std::string_view line(buffer_.data() + begin_, end_ - begin_);
      begin_ = end_;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      ++line_number_;
      return line;
    }
    scan_from = begin_ + scanned;
  }
}

bool is_na_token(std::string_view field) noexcept {
  auto iequals = [](std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
             return (x >= 'a' && x <= 'z' ? x - 32 : x) == y;
           });
  };
  return field.empty() || iequals(field, "NA") || iequals(field, "NULL");
}

ExpressionReader::ExpressionReader(std::unique_ptr<ByteSource> source) : lines_(std::move(source)) {
  const auto header = lines_.next();
  std::array<std::string_view, 3> fields;
  if (!header) malformed(1, "missing header row");
  if (!split3(*header, fields)) malformed(1, "header must have 3 tab-separated columns");
}

bool ExpressionReader::next(ExpressionRecord& record) {
  std::array<std::string_view, 3> fields;
  for (;;) {
    const auto line = lines_.next();
    if (!line) return false;
    if (line->empty()) continue;
    if (!split3(*line, fields)) malformed(lines_.line_number(), "expected 3 tab-separated columns");
    const auto sample = trim(fields[0]);
    const auto gene = trim(fields[1]);
    if (sample.empty() || gene.empty()) malformed(lines_.line_number(), "empty sample id or gene name");
    record.sample_id.assign(sample);
    record.gene_name.assign(gene);
    record.z_score = parse_score(fields[2], lines_.line_number());
    return true;
  }
}

SampleLabels parse_sample_metadata(std::unique_ptr<ByteSource> source) {
  LineReader lines(std::move(source));
  std::array<std::string_view, 3> fields;
  const auto header = lines.next();
  if (!header) malformed(1, "missing header row");
  if (!split3(*header, fields)) malformed(1, "header must have 3 tab-separated columns");

  SampleLabels labels;
  while (const auto line = lines.next()) {
    if (line->empty()) continue;
    if (!split3(*line, fields)) malformed(lines.line_number(), "expected 3 tab-separated columns");
    const auto sample = trim(fields[0]);
    const auto site = trim(fields[1]);
    const auto subtype = trim(fields[2]);
    if (sample.empty() || site.empty() || subtype.empty()) {
      malformed(lines.line_number(), "sample id, primary site and histology subtype must be non-empty");
    }
    std::string label;
    label.reserve(site.size() + subtype.size() + 1);
    label.append(site).append("/").append(subtype);
    if (!labels.emplace(std::string(sample), std::move(label)).second) {
      throw Error(ErrorCode::DuplicateSample, std::string(sample));
    }
  }
  return labels;
}

struct PivotBuilder::Impl {
  Interner sample_ids;
  Interner gene_ids;
  std::vector<std::string> samples;
  std::vector<std::string> genes;
  // staging[sample][block] -> kBlockGenes cells, allocated on first touch.
  std::vector<std::vector<std::unique_ptr<float[]>>> staging;
  std::size_t records = 0;

  float* cell(std::uint32_t sample, std::uint32_t gene) {
    auto& blocks = staging[sample];
    const std::size_t block = gene / kBlockGenes;
    if (blocks.size() <= block) blocks.resize(block + 1);
    if (!blocks[block]) {
      blocks[block] = std::make_unique_for_overwrite<float[]>(kBlockGenes);
      std::fill_n(blocks[block].get(), kBlockGenes, std::bit_cast<float>(kUnobservedBits));
    }
    return blocks[block].get() + gene % kBlockGenes;
  }

  float peek(std::uint32_t sample, std::uint32_t gene) const {
    const auto& blocks = staging[sample];
    const std::size_t block = gene / kBlockGenes;
    if (block >= blocks.size() || !blocks[block]) return std::bit_cast<float>(kUnobservedBits);
    return blocks[block][gene % kBlockGenes];
  }
};

PivotBuilder::PivotBuilder() : impl_(std::make_unique<Impl>()) {}
PivotBuilder::~PivotBuilder() = default;
PivotBuilder::PivotBuilder(PivotBuilder&&) noexcept = default;
PivotBuilder& PivotBuilder::operator=(PivotBuilder&&) noexcept = default;

void PivotBuilder::add(const ExpressionRecord& record) {
  auto& d = *impl_;
  const std::uint32_t sample = intern(d.sample_ids, d.samples, record.sample_id);
  if (sample == d.staging.size()) d.staging.emplace_back();
  const std::uint32_t gene = intern(d.gene_ids, d.genes, record.gene_name);
  float* slot = d.cell(sample, gene);
  if (std::bit_cast<std::uint32_t>(*slot) != kUnobservedBits) {
    throw Error(ErrorCode::DuplicateCell, "(" + record.sample_id + ", " + record.gene_name + ")");
  }
  *slot = record.z_score ? *record.z_score : std::bit_cast<float>(kMissingBits);
  ++d.records;
}

IngestResult PivotBuilder::finish(const SampleLabels& labels) {
  auto& d = *impl_;
  IngestResult result;
  auto& summary = result.summary;
  summary.records = d.records;
  summary.genes_observed = d.genes.size();

  // Inner join on sample id; unlabeled samples are released immediately.
  std::vector<std::uint32_t> kept_samples;
  std::vector<const std::string*> kept_labels;
  {
    std::vector<std::uint32_t> by_name(d.samples.size());
    std::iota(by_name.begin(), by_name.end(), 0u);
    std::sort(by_name.begin(), by_name.end(),
              [&](std::uint32_t a, std::uint32_t b) { return d.samples[a] < d.samples[b]; });
    for (std::uint32_t s : by_name) {
      const auto it = labels.find(d.samples[s]);
      if (it == labels.end()) {
        ++summary.dropped_unlabeled_samples;
        d.staging[s].clear();
        d.staging[s].shrink_to_fit();
        continue;
      }
      kept_samples.push_back(s);
      kept_labels.push_back(&it->second);
    }
  }
  if (kept_samples.empty()) throw Error(ErrorCode::EmptyResult, "no expression sample has metadata");

  std::vector<std::uint32_t> gene_order(d.genes.size());
  std::iota(gene_order.begin(), gene_order.end(), 0u);
  std::sort(gene_order.begin(), gene_order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return d.genes[a] < d.genes[b]; });
  std::vector<std::uint32_t> kept_genes;
  for (std::uint32_t g : gene_order) {
    const bool complete = std::all_of(kept_samples.begin(), kept_samples.end(), [&](std::uint32_t s) {
      return !std::isnan(d.peek(s, g));
    });
    if (complete) {
      kept_genes.push_back(g);
    } else {
      summary.dropped_genes.push_back(d.genes[g]);
    }
  }
  if (kept_genes.empty()) throw Error(ErrorCode::EmptyResult, "every gene has a missing value in some sample");
  summary.genes_retained = kept_genes.size();

  std::set<std::string_view> distinct;
  for (const auto* label : kept_labels) distinct.insert(*label);
  std::vector<std::string> class_names(distinct.begin(), distinct.end());

  const std::size_t n = kept_samples.size();
  const std::size_t m = kept_genes.size();
  std::vector<float> values(n * m);
  std::vector<std::uint32_t> row_class(n);
  std::vector<std::string> gene_names;
  gene_names.reserve(m);
  for (std::uint32_t g : kept_genes) gene_names.push_back(d.genes[g]);
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint32_t s = kept_samples[r];
    float* out = values.data() + r * m;
    for (std::size_t j = 0; j < m; ++j) out[j] = d.peek(s, kept_genes[j]);
    d.staging[s].clear();
    d.staging[s].shrink_to_fit();
    row_class[r] = static_cast<std::uint32_t>(
        std::lower_bound(class_names.begin(), class_names.end(), *kept_labels[r]) - class_names.begin());
    summary.retained_samples.push_back(d.samples[s]);
  }

  result.matrix = LabeledMatrix(std::move(values), std::move(gene_names), std::move(class_names), std::move(row_class));
  impl_ = std::make_unique<Impl>();
  return result;
}

IngestResult build_matrix(ExpressionReader& records, const SampleLabels& labels) {
  if (labels.empty()) throw Error(ErrorCode::EmptyResult, "sample metadata is empty");
  PivotBuilder pivot;
  ExpressionRecord record;
  while (records.next(record)) pivot.add(record);
  return pivot.finish(labels);
}

IngestResult ingest_files(const std::filesystem::path& expression_tsv, const std::filesystem::path& sample_tsv) {
  const SampleLabels labels = parse_sample_metadata(make_file_source(sample_tsv));
  ExpressionReader reader(make_file_source(expression_tsv));
  return build_matrix(reader, labels);
}

}  // namespace expressml
