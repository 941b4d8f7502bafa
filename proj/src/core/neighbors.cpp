#include "expressml/neighbors.hpp"

#include <algorithm>
#include <cmath>

#include "expressml/error.hpp"

namespace expressml {

double manhattan_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "vectors of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  return sum;
}

KnnModel train_knn(std::shared_ptr<const LabeledMatrix> data, std::span<const std::size_t> rows,
                   const KnnParams& params) {
  if (!data) throw Error(ErrorCode::InvalidArgument, "KNN needs a training matrix");
  if (params.k < 1 || params.k > rows.size()) {
    throw Error(ErrorCode::InvalidParams,
                "k must lie in [1, " + std::to_string(rows.size()) + "], got " + std::to_string(params.k));
  }
  for (std::size_t r : rows) {
    if (r >= data->rows()) throw Error(ErrorCode::InvalidArgument, "training row out of range");
  }
  return KnnModel{std::move(data), std::vector<std::size_t>(rows.begin(), rows.end()), params.k};
}

KnnPrediction predict_knn(const KnnModel& model, std::span<const float> sample) {
  const LabeledMatrix& data = *model.data;
  if (sample.size() != data.cols()) {
    throw Error(ErrorCode::WidthMismatch, "sample has " + std::to_string(sample.size()) + " genes, model expects " +
                                              std::to_string(data.cols()));
  }
  std::vector<Neighbor> all(model.train_rows.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    const std::size_t r = model.train_rows[i];
    all[i] = Neighbor{r, manhattan_distance(data.row(r), sample)};
  }
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.row < b.row);
  };
  const std::size_t k = std::min(model.k, all.size());
  std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k - 1), all.end(), closer);
  all.resize(k);
  std::sort(all.begin(), all.end(), closer);

  std::vector<std::size_t> votes(data.classes(), 0);
  std::vector<double> distance_sum(data.classes(), 0.0);
  for (const Neighbor& nb : all) {
    ++votes[data.label(nb.row)];
    distance_sum[data.label(nb.row)] += nb.distance;
  }
  std::uint32_t best = 0;
  for (std::uint32_t c = 1; c < votes.size(); ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && distance_sum[c] < distance_sum[best])) best = c;
  }
  return KnnPrediction{best, std::move(all)};
}

}  // namespace expressml
