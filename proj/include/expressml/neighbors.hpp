#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "expressml/dataset.hpp"

namespace expressml {

/// Sum of |a_i - b_i|, accumulated in double. Throws LengthMismatch.
double manhattan_distance(std::span<const float> a, std::span<const float> b);

struct KnnParams {
  std::size_t k = 5;

  friend bool operator==(const KnnParams&, const KnnParams&) = default;
};

/// A read-only view of the training rows plus k.
struct KnnModel {
  std::shared_ptr<const LabeledMatrix> data;
  std::vector<std::size_t> train_rows;
  std::size_t k = 5;
};

struct Neighbor {
  std::size_t row = 0;  // row index in the backing matrix
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct KnnPrediction {
  std::uint32_t label = 0;
  std::vector<Neighbor> neighbors;  // nearest first
};

KnnModel train_knn(std::shared_ptr<const LabeledMatrix> data, std::span<const std::size_t> rows,
                   const KnnParams& params);

/// Exact scan. Neighbors are the k smallest (distance, row) pairs; the label
/// is the majority among them, ties going to the smaller summed distance and
/// then the lower class index.
KnnPrediction predict_knn(const KnnModel& model, std::span<const float> sample);

}  // namespace expressml
