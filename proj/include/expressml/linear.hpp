#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "expressml/binary_io.hpp"
#include "expressml/dataset.hpp"

namespace expressml {

struct LinearParams {
  double lambda = 1e-4;
  std::size_t epochs = 20;
  std::uint64_t seed = 42;

  friend bool operator==(const LinearParams&, const LinearParams&) = default;
};

/// One-vs-rest linear hinge-loss classifier. weights is classes x features,
/// row-major; margin_c(x) = w_c . x + b_c.
struct LinearOvrModel {
  std::size_t classes = 0;
  std::size_t features = 0;
  LinearParams params;
  std::vector<double> weights;
  std::vector<double> biases;

  std::span<const double> class_weights(std::size_t c) const noexcept {
    return {weights.data() + c * features, features};
  }

  friend bool operator==(const LinearOvrModel&, const LinearOvrModel&) = default;
};

struct LinearPrediction {
  std::uint32_t label = 0;
  std::vector<double> margins;
};

/// Pegasos: for each class, single-sample subgradient steps with step size
/// 1/(lambda t) over a seeded shuffle per epoch, followed by projection onto
/// the ball of radius 1/sqrt(lambda). The bias is an extra constant feature
/// and is regularized with the weights. Each class keeps whichever epoch-end
/// iterate (or the zero start) has the lowest objective.
LinearOvrModel train_linear_ovr(const LabeledMatrix& train, std::span<const std::size_t> rows,
                                const LinearParams& params, unsigned workers = 1);

LinearPrediction predict_linear(const LinearOvrModel& model, std::span<const float> sample);

/// Sum over classes of lambda/2 (|w_c|^2 + b_c^2) + mean hinge loss of the
/// class-c binary problem: the quantity each one-vs-rest problem minimizes.
double linear_objective(const LinearOvrModel& model, const LabeledMatrix& train, std::span<const std::size_t> rows);

void write_linear(ByteWriter& out, const LinearOvrModel& model);
LinearOvrModel read_linear(ByteReader& in);

}  // namespace expressml
