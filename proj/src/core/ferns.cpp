#include "expressml/ferns.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "expressml/error.hpp"
#include "expressml/parallel.hpp"
#include "expressml/rng.hpp"

namespace expressml {

namespace {

void check_width(std::size_t expected, std::span<const float> sample) {
  if (sample.size() != expected) {
    throw Error(ErrorCode::WidthMismatch, "sample has " + std::to_string(sample.size()) + " genes, model expects " +
                                              std::to_string(expected));
  }
}

}  // namespace

std::size_t fern_bucket(const Fern& fern, std::span<const float> sample) {
  std::size_t index = 0;
  for (std::size_t i = 0; i < fern.features.size(); ++i) {
    const std::size_t f = fern.features[i];
    if (f >= sample.size()) {
      throw Error(ErrorCode::WidthMismatch, "fern compares feature " + std::to_string(f) + " of a " +
                                                std::to_string(sample.size()) + "-gene sample");
    }
    if (static_cast<double>(sample[f]) > fern.thresholds[i]) index |= std::size_t{1} << i;
  }
  return index;
}

FernsModel train_ferns(const LabeledMatrix& train, std::span<const std::size_t> rows, const FernsParams& params,
                       unsigned workers) {
  if (params.n_ferns < 1) throw Error(ErrorCode::InvalidParams, "n_ferns must be >= 1");
  if (params.depth < 1 || params.depth > kMaxFernDepth) {
    throw Error(ErrorCode::InvalidParams, "fern depth must lie in [1, " + std::to_string(kMaxFernDepth) + "]");
  }
  if (rows.empty()) throw Error(ErrorCode::InvalidParams, "ferns need training rows");
  if (train.cols() == 0) throw Error(ErrorCode::InvalidParams, "ferns need at least one feature");

  const std::size_t m = train.cols();
  const std::size_t classes = train.classes();
  const std::size_t buckets = std::size_t{1} << params.depth;

  FernsModel model;
  model.classes = classes;
  model.features = m;
  model.params = params;

  std::vector<double> class_sizes(classes, 0.0);
  for (std::size_t r : rows) class_sizes[train.label(r)] += 1.0;
  model.log_priors.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    model.log_priors[c] = class_sizes[c] > 0.0 ? std::log(class_sizes[c] / static_cast<double>(rows.size()))
                                               : -std::numeric_limits<double>::infinity();
  }

  // Observed range of every column over the training rows.
  std::vector<float> lo(m, std::numeric_limits<float>::infinity());
  std::vector<float> hi(m, -std::numeric_limits<float>::infinity());
  for (std::size_t r : rows) {
    const auto x = train.row(r);
    for (std::size_t f = 0; f < m; ++f) {
      lo[f] = std::min(lo[f], x[f]);
      hi[f] = std::max(hi[f], x[f]);
    }
  }

  model.ferns.resize(params.n_ferns);
  parallel_for(params.n_ferns, workers, [&](std::size_t index) {
    Rng rng = Rng::stream(params.seed, index);
    Fern& fern = model.ferns[index];
    fern.features.resize(params.depth);
    fern.thresholds.resize(params.depth);
    for (std::size_t d = 0; d < params.depth; ++d) {
      const auto f = static_cast<std::uint32_t>(rng.below(m));
      fern.features[d] = f;
      fern.thresholds[d] = rng.uniform(lo[f], hi[f]);
    }
    std::vector<std::uint32_t> counts(classes * buckets, 0);
    for (std::size_t r : rows) ++counts[train.label(r) * buckets + fern_bucket(fern, train.row(r))];
    fern.class_log_counts.resize(classes * buckets);
    for (std::size_t c = 0; c < classes; ++c) {
      const double denominator = std::log(class_sizes[c] + static_cast<double>(buckets));
      for (std::size_t b = 0; b < buckets; ++b) {
        fern.class_log_counts[c * buckets + b] = std::log(static_cast<double>(counts[c * buckets + b]) + 1.0) - denominator;
      }
    }
  });
  return model;
}

FernsPrediction predict_ferns(const FernsModel& model, std::span<const float> sample) {
  check_width(model.features, sample);
  FernsPrediction out;
  out.log_posterior = model.log_priors;
  for (const Fern& fern : model.ferns) {
    const std::size_t bucket = fern_bucket(fern, sample);
    const std::size_t buckets = fern.buckets();
    for (std::size_t c = 0; c < model.classes; ++c) out.log_posterior[c] += fern.class_log_counts[c * buckets + bucket];
  }
  out.label = static_cast<std::uint32_t>(std::max_element(out.log_posterior.begin(), out.log_posterior.end()) -
                                         out.log_posterior.begin());
  return out;
}

std::vector<double> ferns_posterior(const FernsPrediction& prediction) {
  const auto& s = prediction.log_posterior;
  std::vector<double> p(s.size(), 0.0);
  if (s.empty()) return p;
  const double top = *std::max_element(s.begin(), s.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < s.size(); ++c) {
    p[c] = std::exp(s[c] - top);
    sum += p[c];
  }
  for (double& v : p) v /= sum;
  return p;
}

void write_ferns(ByteWriter& out, const FernsModel& model) {
  out.u64(model.classes);
  out.u64(model.features);
  out.u64(model.params.n_ferns);
  out.u64(model.params.depth);
  out.u64(model.params.seed);
  for (double v : model.log_priors) out.f64(v);
  for (const Fern& fern : model.ferns) {
    for (std::size_t d = 0; d < fern.depth(); ++d) {
      out.u32(fern.features[d]);
      out.f64(fern.thresholds[d]);
    }
    for (double v : fern.class_log_counts) out.f64(v);
  }
}

FernsModel read_ferns(ByteReader& in) {
  FernsModel model;
  model.classes = in.u64();
  model.features = in.u64();
  model.params.n_ferns = in.u64();
  model.params.depth = in.u64();
  model.params.seed = in.u64();
  if (model.params.depth < 1 || model.params.depth > kMaxFernDepth) {
    throw Error(ErrorCode::InvalidArgument, "fern depth out of range in container");
  }
  const std::size_t buckets = std::size_t{1} << model.params.depth;
  const std::size_t per_fern = model.params.depth * 12 + model.classes * buckets * 8;
  if (model.classes > in.remaining() / 8 || model.params.n_ferns > in.remaining() / std::max<std::size_t>(per_fern, 1)) {
    throw Error(ErrorCode::TruncatedFile, "ferns payload");
  }
  model.log_priors.resize(model.classes);
  for (double& v : model.log_priors) v = in.f64();
  model.ferns.resize(model.params.n_ferns);
  for (Fern& fern : model.ferns) {
    fern.features.resize(model.params.depth);
    fern.thresholds.resize(model.params.depth);
    for (std::size_t d = 0; d < model.params.depth; ++d) {
      fern.features[d] = in.u32();
      fern.thresholds[d] = in.f64();
    }
    fern.class_log_counts.resize(model.classes * buckets);
    for (double& v : fern.class_log_counts) v = in.f64();
  }
  return model;
}

}  // namespace expressml
