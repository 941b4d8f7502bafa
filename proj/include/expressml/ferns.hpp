#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "expressml/binary_io.hpp"
#include "expressml/dataset.hpp"

namespace expressml {

struct FernsParams {
  std::size_t n_ferns = 1000;
  std::size_t depth = 10;
  std::uint64_t seed = 42;

  friend bool operator==(const FernsParams&, const FernsParams&) = default;
};

/// D binary tests (sample[feature] > threshold) whose outcome bits index one
/// of 2^D buckets; each bucket holds add-one smoothed class log-frequencies.
struct Fern {
  std::vector<std::uint32_t> features;
  std::vector<double> thresholds;
  /// classes x 2^D, row-major by class.
  std::vector<double> class_log_counts;

  std::size_t depth() const noexcept { return features.size(); }
  std::size_t buckets() const noexcept { return std::size_t{1} << features.size(); }

  friend bool operator==(const Fern&, const Fern&) = default;
};

struct FernsModel {
  std::vector<Fern> ferns;
  std::size_t classes = 0;
  std::size_t features = 0;
  FernsParams params;
  std::vector<double> log_priors;

  friend bool operator==(const FernsModel&, const FernsModel&) = default;
};

struct FernsPrediction {
  std::uint32_t label = 0;
  std::vector<double> log_posterior;  // unnormalized
};

inline constexpr std::size_t kMaxFernDepth = 20;

/// Bit i of the result is set iff sample[features[i]] > thresholds[i].
std::size_t fern_bucket(const Fern& fern, std::span<const float> sample);

/// Fern f draws its tests from Rng::stream(seed, f): a uniform column, then a
/// threshold uniform over that column's observed training range.
FernsModel train_ferns(const LabeledMatrix& train, std::span<const std::size_t> rows, const FernsParams& params,
                       unsigned workers = 1);

/// score(c) = log prior(c) + sum over ferns of the bucket's log count;
/// argmax with ties to the lower class index.
FernsPrediction predict_ferns(const FernsModel& model, std::span<const float> sample);

/// exp-normalized log posterior.
std::vector<double> ferns_posterior(const FernsPrediction& prediction);

void write_ferns(ByteWriter& out, const FernsModel& model);
FernsModel read_ferns(ByteReader& in);

}  // namespace expressml
