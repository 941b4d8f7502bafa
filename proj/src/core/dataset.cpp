#include "expressml/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "expressml/binary_io.hpp"
#include "expressml/error.hpp"
#include "expressml/rng.hpp"

namespace expressml {

namespace {

constexpr std::string_view kDatasetMagic = "EXML";

bool strictly_sorted(const std::vector<std::string>& names) {
  return std::adjacent_find(names.begin(), names.end(),
                            [](const auto& a, const auto& b) { return !(a < b); }) == names.end();
}

std::string padded(std::string_view prefix, std::size_t value, std::size_t max_value) {
  const int width = static_cast<int>(std::to_string(max_value).size());
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, value);
  return std::string(prefix) + buf;
}

}  // namespace

LabeledMatrix::LabeledMatrix(std::vector<float> values, std::vector<std::string> gene_names,
                             std::vector<std::string> class_names, std::vector<std::uint32_t> row_class)
    : values_(std::move(values)),
      gene_names_(std::move(gene_names)),
      class_names_(std::move(class_names)),
      row_class_(std::move(row_class)) {
  if (class_names_.empty()) throw Error(ErrorCode::InvalidArgument, "matrix needs at least one class");
  if (values_.size() != row_class_.size() * gene_names_.size()) {
    throw Error(ErrorCode::InvalidArgument, "value count does not equal rows x columns");
  }
  if (!strictly_sorted(gene_names_)) throw Error(ErrorCode::InvalidArgument, "gene names must be unique and sorted");
  if (!strictly_sorted(class_names_)) throw Error(ErrorCode::InvalidArgument, "class names must be unique and sorted");
  for (std::uint32_t c : row_class_) {
    if (c >= class_names_.size()) throw Error(ErrorCode::InvalidArgument, "row label index out of range");
  }
}

std::int64_t LabeledMatrix::class_index(std::string_view name) const noexcept {
  auto it = std::lower_bound(class_names_.begin(), class_names_.end(), name);
  if (it == class_names_.end() || *it != name) return -1;
  return it - class_names_.begin();
}

std::int64_t LabeledMatrix::gene_index(std::string_view name) const noexcept {
  auto it = std::lower_bound(gene_names_.begin(), gene_names_.end(), name);
  if (it == gene_names_.end() || *it != name) return -1;
  return it - gene_names_.begin();
}

LabeledMatrix LabeledMatrix::select_columns(std::span<const std::size_t> columns) const {
  std::vector<std::size_t> sorted(columns.begin(), columns.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorCode::InvalidArgument, "duplicate column in selection");
  }
  if (!sorted.empty() && sorted.back() >= cols()) throw Error(ErrorCode::FeatureOutOfRange, "column selection out of range");

  // Gene names are sorted, so ascending column indices keep them sorted.
  std::vector<std::string> names;
  names.reserve(sorted.size());
  for (std::size_t c : sorted) names.push_back(gene_names_[c]);
  std::vector<float> values;
  values.reserve(rows() * sorted.size());
  for (std::size_t r = 0; r < rows(); ++r) {
    const auto src = row(r);
    for (std::size_t c : sorted) values.push_back(src[c]);
  }
  return LabeledMatrix(std::move(values), std::move(names), class_names_, row_class_);
}

SplitIndices stratified_split(const LabeledMatrix& matrix, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "split fraction must lie in (0, 1)");
  }
  const std::size_t class_count = matrix.classes();
  std::vector<std::vector<std::size_t>> members(class_count);
  for (std::size_t r = 0; r < matrix.rows(); ++r) members[matrix.label(r)].push_back(r);
  for (std::size_t c = 0; c < class_count; ++c) {
    if (members[c].size() < 2) throw Error(ErrorCode::ClassTooSmall, matrix.class_names()[c]);
  }

  // The epsilon absorbs representation error such as 0.57 * 100 = 56.999...
  auto floor_of = [](double x) { return static_cast<std::size_t>(std::floor(x + 1e-9)); };
  const std::size_t total_quota = floor_of(fraction * static_cast<double>(matrix.rows()));

  std::vector<std::size_t> quota(class_count);
  std::vector<double> remainder(class_count);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < class_count; ++c) {
    const double exact = fraction * static_cast<double>(members[c].size());
    quota[c] = floor_of(exact);
    remainder[c] = std::max(0.0, exact - static_cast<double>(quota[c]));
    assigned += quota[c];
  }
  std::vector<std::size_t> by_remainder(class_count);
  std::iota(by_remainder.begin(), by_remainder.end(), 0);
  std::stable_sort(by_remainder.begin(), by_remainder.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total_quota && i < class_count; ++i) {
    ++quota[by_remainder[i]];
    ++assigned;
  }

  SplitIndices split;
  split.seed = seed;
  split.fraction = fraction;
  for (std::size_t c = 0; c < class_count; ++c) {
    auto rows = members[c];
    Rng rng = Rng::stream(seed, c);
    rng.shuffle(std::span<std::size_t>(rows));
    split.train_rows.insert(split.train_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(quota[c]));
    split.test_rows.insert(split.test_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(quota[c]), rows.end());
  }
  std::sort(split.train_rows.begin(), split.train_rows.end());
  std::sort(split.test_rows.begin(), split.test_rows.end());
  return split;
}

void save_split(const SplitIndices& split, std::uint64_t dataset_fingerprint, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["format"] = "expressml-split";
  doc["version"] = 1;
  doc["dataset_fingerprint"] = hex64(dataset_fingerprint);
  doc["fraction"] = split.fraction;
  doc["seed"] = split.seed;
  doc["train_rows"] = split.train_rows;
  doc["test_rows"] = split.test_rows;
  write_text_file(path, doc.dump(1) + "\n");
}

SplitIndices load_split(const std::filesystem::path& path, std::uint64_t expected_fingerprint) {
  const auto bytes = read_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
    if (doc.at("format") != "expressml-split") throw Error(ErrorCode::BadMagic, path.string() + " is not a split file");
    if (doc.at("version") != 1) throw Error(ErrorCode::VersionMismatch, "unsupported split file version");
    if (doc.at("dataset_fingerprint") != hex64(expected_fingerprint)) {
      throw Error(ErrorCode::DatasetMismatch, "split file was made for a different dataset");
    }
    SplitIndices split;
    split.fraction = doc.at("fraction").get<double>();
    split.seed = doc.at("seed").get<std::uint64_t>();
    split.train_rows = doc.at("train_rows").get<std::vector<std::size_t>>();
    split.test_rows = doc.at("test_rows").get<std::vector<std::size_t>>();
    return split;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRow, "bad split file '" + path.string() + "': " + e.what());
  }
}

std::vector<std::uint8_t> encode_dataset(const LabeledMatrix& matrix) {
  ByteWriter out;
  out.magic(kDatasetMagic);
  out.u32(kDatasetFormatVersion);
  out.u64(matrix.rows());
  out.u64(matrix.cols());
  out.u32(static_cast<std::uint32_t>(matrix.classes()));
  for (const auto& name : matrix.class_names()) out.str(name);
  for (const auto& name : matrix.gene_names()) out.str(name);
  for (std::uint32_t c : matrix.row_class()) out.u32(c);
  for (float v : matrix.values()) out.f32(v);
  out.seal();
  return out.take();
}

LabeledMatrix decode_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  in.open_sealed(kDatasetMagic);
  const std::uint32_t version = in.u32();
  if (version != kDatasetFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "dataset container version " + std::to_string(version) +
                                                ", expected " + std::to_string(kDatasetFormatVersion));
  }
  const std::uint64_t n = in.u64();
  const std::uint64_t m = in.u64();
  const std::uint32_t c = in.u32();

  // Every table entry needs at least 4 bytes; refuse to allocate for more
  // entries than the file could possibly hold.
  const std::uint64_t budget = in.remaining() / 4;
  if (n > budget || m > budget || c > budget || (m != 0 && n > budget / m)) {
    throw Error(ErrorCode::TruncatedFile, "container header declares more data than the file holds");
  }

  std::vector<std::string> class_names(c);
  for (auto& name : class_names) name = in.str();
  std::vector<std::string> gene_names(m);
  for (auto& name : gene_names) name = in.str();
  std::vector<std::uint32_t> row_class(n);
  for (auto& label : row_class) label = in.u32();
  std::vector<float> values(n * m);
  in.f32_array(values);
  in.expect_end();
  return LabeledMatrix(std::move(values), std::move(gene_names), std::move(class_names), std::move(row_class));
}

void save_dataset(const LabeledMatrix& matrix, const std::filesystem::path& path) {
  write_file(path, encode_dataset(matrix));
}

LabeledMatrix load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

std::uint64_t dataset_fingerprint(const LabeledMatrix& matrix) { return fnv1a64(encode_dataset(matrix)); }

SyntheticData generate_synthetic(const SynthSpec& spec) {
  if (spec.classes < 1 || spec.genes < 1) throw Error(ErrorCode::InvalidSpec, "need at least one class and one gene");
  if (spec.samples_per_class < 2) throw Error(ErrorCode::InvalidSpec, "samples_per_class must be >= 2");
  if (spec.informative_genes > spec.genes) throw Error(ErrorCode::InvalidSpec, "informative_genes exceeds genes");
  if (!(spec.effect_size > 0.0) || !std::isfinite(spec.effect_size)) {
    throw Error(ErrorCode::InvalidSpec, "effect_size must be positive");
  }
  if (!(spec.noise_sd > 0.0) || !std::isfinite(spec.noise_sd)) {
    throw Error(ErrorCode::InvalidSpec, "noise_sd must be positive");
  }

  const std::size_t n = spec.classes * spec.samples_per_class;
  const std::size_t m = spec.genes;
  Rng rng(spec.seed);

  // Planted columns: the first k entries of a seeded partial shuffle.
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < spec.informative_genes; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(m - i));
    std::swap(order[i], order[j]);
  }
  std::vector<std::size_t> planted(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.informative_genes));
  std::sort(planted.begin(), planted.end());

  // Class means for planted genes. A sign pattern shared by every class would
  // carry no class information, so such patterns are redrawn.
  std::vector<double> means(spec.classes * m, 0.0);
  for (std::size_t gene : planted) {
    for (;;) {
      bool any_plus = false;
      bool any_minus = false;
      for (std::size_t c = 0; c < spec.classes; ++c) {
        const bool plus = rng.coin();
        means[c * m + gene] = plus ? spec.effect_size : -spec.effect_size;
        (plus ? any_plus : any_minus) = true;
      }
      if (spec.classes < 2 || (any_plus && any_minus)) break;
    }
  }

  std::vector<double> raw(n * m);
  std::vector<std::uint32_t> row_class(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t c = r / spec.samples_per_class;
    row_class[r] = static_cast<std::uint32_t>(c);
    for (std::size_t g = 0; g < m; ++g) raw[r * m + g] = means[c * m + g] + spec.noise_sd * rng.normal();
  }

  std::vector<float> values(n * m);
  for (std::size_t g = 0; g < m; ++g) {
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) sum += raw[r * m + g];
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) ss += (raw[r * m + g] - mean) * (raw[r * m + g] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    const double scale = sd > 0.0 ? 1.0 / sd : 1.0;
    for (std::size_t r = 0; r < n; ++r) values[r * m + g] = static_cast<float>((raw[r * m + g] - mean) * scale);
  }

  std::vector<std::string> gene_names(m);
  for (std::size_t g = 0; g < m; ++g) gene_names[g] = padded("GENE", g + 1, m);
  std::vector<std::string> class_names(spec.classes);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    class_names[c] = padded("Site", c + 1, spec.classes) + "/" + padded("Subtype", c + 1, spec.classes);
  }

  SyntheticData out;
  for (std::size_t g : planted) out.planted_genes.push_back(gene_names[g]);
  out.matrix = LabeledMatrix(std::move(values), std::move(gene_names), std::move(class_names), std::move(row_class));
  return out;
}

}  // namespace expressml
