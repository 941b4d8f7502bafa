#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "expressml/dataset.hpp"

namespace fixtures {

inline std::vector<std::string> gene_names(std::size_t m) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < m; ++i) {
    std::string s = std::to_string(i);
    names.push_back("G" + std::string(4 - std::min<std::size_t>(4, s.size()), '0') + s);
  }
  return names;
}

inline std::vector<std::string> class_names(std::size_t c) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < c; ++i) names.push_back(std::string("Class") + static_cast<char>('A' + i));
  return names;
}

/// Matrix from row-major values with generated names.
inline expressml::LabeledMatrix matrix(std::vector<float> values, std::size_t cols, std::vector<std::uint32_t> labels,
                                       std::size_t classes) {
  return expressml::LabeledMatrix(std::move(values), gene_names(cols), class_names(classes), std::move(labels));
}

inline std::vector<std::size_t> all_rows(const expressml::LabeledMatrix& m) {
  std::vector<std::size_t> rows(m.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

/// Gaussian blobs: class c has mean `shift` * (c+1) on the first `informative` columns.
inline expressml::LabeledMatrix blobs(std::size_t per_class, std::size_t classes, std::size_t cols,
                                      std::size_t informative, double shift, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  std::vector<float> values;
  std::vector<std::uint32_t> labels;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        float v = noise(gen);
        if (j < informative) v += static_cast<float>(shift * static_cast<double>((c + j) % classes));
        values.push_back(v);
      }
      labels.push_back(static_cast<std::uint32_t>(c));
    }
  }
  return matrix(std::move(values), cols, std::move(labels), classes);
}

inline std::shared_ptr<const expressml::LabeledMatrix> share(expressml::LabeledMatrix m) {
  return std::make_shared<const expressml::LabeledMatrix>(std::move(m));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("expressml-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
