#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "fedprint/device_model.hpp"

namespace fedprint {

inline constexpr std::size_t kDefaultGroupSize = 1000;

// One group of consecutive execution-time measurements (microseconds).
struct TimingGroup {
  std::vector<double> samples;
  DeviceModel device_model = DeviceModel::RPI1;
  std::int64_t device_id = 0;
};

// The 13-feature fingerprint of a TimingGroup plus its labels. Decrease
// features are <= 0, increase features >= 0.
struct FeatureVector {
  double min = 0, max = 0, mean = 0, median = 0, std_dev = 0, mode = 0, sum = 0;
  double min_decrease = 0, max_decrease = 0, decrease_sum = 0;
  double min_increase = 0, max_increase = 0, increase_sum = 0;
  DeviceModel model_label = DeviceModel::RPI1;
  std::int64_t device_id = 0;

  // Features in canonical column order (min, max, ..., increase_sum).
  std::array<double, kFeatureCount> features() const;
  void set_features(const std::array<double, kFeatureCount>& values);

  bool operator==(const FeatureVector&) const = default;
};

// Canonical feature column names, in FeatureVector::features() order.
extern const std::array<const char*, kFeatureCount> kFeatureNames;

// Parameters of the synthetic timing distribution for one device model:
// a log-normal body with median base_time and spread `dispersion`, plus
// Bernoulli spikes around spike_scale * base_time.
struct ModelProfile {
  DeviceModel model_label = DeviceModel::RPI1;
  double base_time = 1.0;
  double dispersion = 0.1;
  double spike_probability = 0.0;
  double spike_scale = 1.0;
  // Relative spread of the per-device slowdown factor (0 = all devices of a
  // model share the same base time).
  double device_variation = 0.0;

  void validate() const;
};

// Four pairwise-distinguishable profiles, one per device model.
std::array<ModelProfile, kClassCount> default_profiles();

TimingGroup generate_timing_group(const ModelProfile& profile, std::int64_t device_id,
                                  std::uint64_t rng_seed,
                                  std::size_t group_size = kDefaultGroupSize);

FeatureVector extract_features(const TimingGroup& group);

struct CorpusSpec {
  std::array<ModelProfile, kClassCount> profiles = default_profiles();
  std::array<int, kClassCount> device_counts = {4, 4, 4, 4};
  int groups_per_device = 500;
  std::size_t group_size = kDefaultGroupSize;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t row_count() const;
};

// Rows are ordered model by model, device by device, groups in generation
// (chronological) order. Device ids are assigned sequentially from 0.
std::vector<FeatureVector> build_corpus(const CorpusSpec& spec);

// Groups `rows_per_model` fresh rows per model from devices whose ids start at
// `first_device_id`; used for server-side validation shards.
std::vector<FeatureVector> sample_rows(const CorpusSpec& spec, int rows_per_model,
                                       std::int64_t first_device_id, std::uint64_t seed);

}  // namespace fedprint
