#include "expressml/linear.hpp"

#include <algorithm>
#include <cmath>

#include "expressml/error.hpp"
#include "expressml/parallel.hpp"
#include "expressml/rng.hpp"

namespace expressml {

namespace {

double dot(std::span<const double> w, std::span<const float> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * static_cast<double>(x[i]);
  return s;
}

/// lambda/2 |(w, b)|^2 + mean hinge loss of one binary problem.
double binary_objective(const LabeledMatrix& train, std::span<const std::size_t> rows, std::uint32_t positive,
                        double lambda, std::span<const double> w, double b, double sq_norm) {
  double hinge = 0.0;
  for (std::size_t r : rows) {
    const double y = train.label(r) == positive ? 1.0 : -1.0;
    hinge += std::max(0.0, 1.0 - y * (dot(w, train.row(r)) + b));
  }
  return lambda / 2.0 * sq_norm + hinge / static_cast<double>(rows.size());
}

/// Trains one binary problem; the iterate is held as scale * (v, vb) so the
/// (1 - 1/t) shrink costs O(1). Returns the epoch-end iterate with the lowest
/// objective, the zero start included.
void train_one_vs_rest(const LabeledMatrix& train, std::span<const std::size_t> rows, std::uint32_t positive,
                       const LinearParams& params, std::span<double> weights, double& bias) {
  const std::size_t m = train.cols();
  const double radius = 1.0 / std::sqrt(params.lambda);
  std::vector<double> v(m, 0.0);
  double vb = 0.0;
  double scale = 1.0;
  double sq_norm = 0.0;  // |(v, vb)|^2

  Rng rng = Rng::stream(params.seed, positive);
  std::vector<std::size_t> order(rows.begin(), rows.end());
  std::size_t t = 0;
  std::fill(weights.begin(), weights.end(), 0.0);
  bias = 0.0;
  double best = 1.0;
  std::vector<double> current(m);
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t r : order) {
      ++t;
      const auto x = train.row(r);
      const double y = train.label(r) == positive ? 1.0 : -1.0;
      const double eta = 1.0 / (params.lambda * static_cast<double>(t));
      const double raw = dot(v, x) + vb;
      const double margin = y * scale * raw;

      scale *= 1.0 - 1.0 / static_cast<double>(t);
      if (scale == 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        vb = 0.0;
        sq_norm = 0.0;
        scale = 1.0;
      }
      if (margin < 1.0) {
        const double a = eta * y / scale;
        sq_norm = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          v[i] += a * static_cast<double>(x[i]);
          sq_norm += v[i] * v[i];
        }
        vb += a;
        sq_norm += vb * vb;
      }
      const double norm = scale * std::sqrt(sq_norm);
      if (norm > radius) scale *= radius / norm;
      if (scale < 1e-30) {
        for (double& w : v) w *= scale;
        vb *= scale;
        sq_norm *= scale * scale;
        scale = 1.0;
      }
    }
    for (std::size_t i = 0; i < m; ++i) current[i] = scale * v[i];
    const double objective =
        binary_objective(train, rows, positive, params.lambda, current, scale * vb, scale * scale * sq_norm);
    if (objective < best) {
      best = objective;
      std::copy(current.begin(), current.end(), weights.begin());
      bias = scale * vb;
    }
  }
}

}  // namespace

LinearOvrModel train_linear_ovr(const LabeledMatrix& train, std::span<const std::size_t> rows,
                                const LinearParams& params, unsigned workers) {
  if (!(params.lambda > 0.0) || !std::isfinite(params.lambda)) {
    throw Error(ErrorCode::InvalidParams, "lambda must be positive");
  }
  if (params.epochs < 1) throw Error(ErrorCode::InvalidParams, "epochs must be >= 1");
  std::vector<bool> present(train.classes(), false);
  for (std::size_t r : rows) present[train.label(r)] = true;
  if (std::count(present.begin(), present.end(), true) < 2) {
    throw Error(ErrorCode::InvalidParams, "one-vs-rest training needs at least 2 classes");
  }

  LinearOvrModel model;
  model.classes = train.classes();
  model.features = train.cols();
  model.params = params;
  model.weights.assign(model.classes * model.features, 0.0);
  model.biases.assign(model.classes, 0.0);
  parallel_for(model.classes, workers, [&](std::size_t c) {
    train_one_vs_rest(train, rows, static_cast<std::uint32_t>(c), params,
                      std::span<double>(model.weights).subspan(c * model.features, model.features), model.biases[c]);
  });
  return model;
}

LinearPrediction predict_linear(const LinearOvrModel& model, std::span<const float> sample) {
  if (sample.size() != model.features) {
    throw Error(ErrorCode::WidthMismatch, "sample has " + std::to_string(sample.size()) + " genes, model expects " +
                                              std::to_string(model.features));
  }
  LinearPrediction out;
  out.margins.resize(model.classes);
  for (std::size_t c = 0; c < model.classes; ++c) out.margins[c] = dot(model.class_weights(c), sample) + model.biases[c];
  out.label = static_cast<std::uint32_t>(std::max_element(out.margins.begin(), out.margins.end()) - out.margins.begin());
  return out;
}

double linear_objective(const LinearOvrModel& model, const LabeledMatrix& train, std::span<const std::size_t> rows) {
  double total = 0.0;
  for (std::size_t c = 0; c < model.classes; ++c) {
    const auto w = model.class_weights(c);
    double sq = model.biases[c] * model.biases[c];
    for (double x : w) sq += x * x;
    double hinge = 0.0;
    for (std::size_t r : rows) {
      const double y = train.label(r) == c ? 1.0 : -1.0;
      hinge += std::max(0.0, 1.0 - y * (dot(w, train.row(r)) + model.biases[c]));
    }
    total += model.params.lambda / 2.0 * sq + hinge / static_cast<double>(rows.size());
  }
  return total;
}

void write_linear(ByteWriter& out, const LinearOvrModel& model) {
  out.u64(model.classes);
  out.u64(model.features);
  out.f64(model.params.lambda);
  out.u64(model.params.epochs);
  out.u64(model.params.seed);
  for (double v : model.weights) out.f64(v);
  for (double v : model.biases) out.f64(v);
}

LinearOvrModel read_linear(ByteReader& in) {
  LinearOvrModel model;
  model.classes = in.u64();
  model.features = in.u64();
  model.params.lambda = in.f64();
  model.params.epochs = in.u64();
  model.params.seed = in.u64();
  if (model.classes > in.remaining() / 8 || (model.classes != 0 && model.features > in.remaining() / 8 / model.classes)) {
    throw Error(ErrorCode::TruncatedFile, "linear payload");
  }
  model.weights.resize(model.classes * model.features);
  for (double& v : model.weights) v = in.f64();
  model.biases.resize(model.classes);
  for (double& v : model.biases) v = in.f64();
  return model;
}

}  // namespace expressml
