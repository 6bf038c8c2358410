#include "fedprint/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "fedprint/errors.hpp"
#include "fedprint/seeding.hpp"

namespace fedprint {

const std::array<const char*, kFeatureCount> kFeatureNames = {
    "min",          "max",          "mean",         "median",       "std_dev",
    "mode",         "sum",          "min_decrease", "max_decrease", "decrease_sum",
    "min_increase", "max_increase", "increase_sum"};

std::array<double, kFeatureCount> FeatureVector::features() const {
  return {min,          max,          mean,         median,       std_dev,
          mode,         sum,          min_decrease, max_decrease, decrease_sum,
          min_increase, max_increase, increase_sum};
}

void FeatureVector::set_features(const std::array<double, kFeatureCount>& v) {
  min = v[0];
  max = v[1];
  mean = v[2];
  median = v[3];
  std_dev = v[4];
  mode = v[5];
  sum = v[6];
  min_decrease = v[7];
  max_decrease = v[8];
  decrease_sum = v[9];
  min_increase = v[10];
  max_increase = v[11];
  increase_sum = v[12];
}

void ModelProfile::validate() const {
  const std::string who = "profile " + std::string(to_string(model_label)) + ": ";
  if (!(base_time > 0) || !std::isfinite(base_time))
    throw ConfigError(who + "base_time must be positive");
  if (!(dispersion > 0) || !std::isfinite(dispersion))
    throw ConfigError(who + "dispersion must be positive");
  if (!(spike_probability >= 0 && spike_probability <= 1))
    throw ConfigError(who + "spike_probability must lie in [0,1]");
  if (!(spike_scale > 0) || !std::isfinite(spike_scale))
    throw ConfigError(who + "spike_scale must be positive");
  if (!(device_variation >= 0) || !std::isfinite(device_variation))
    throw ConfigError(who + "device_variation must be non-negative");
}

std::array<ModelProfile, kClassCount> default_profiles() {
  // Older boards are slower and noisier. RPI4 mirrors the magnitude of the
  // published example vector (mean ~4.2us, std ~1.3us).
  return {{
      {DeviceModel::RPI1, 40.0, 4.0, 0.010, 3.0, 0.03},
      {DeviceModel::RPI2, 20.0, 2.5, 0.010, 3.0, 0.03},
      {DeviceModel::RPI3, 10.0, 1.5, 0.010, 3.0, 0.03},
      {DeviceModel::RPI4, 4.0, 1.0, 0.010, 3.0, 0.03},
  }};
}

namespace {

double device_factor(const ModelProfile& profile, std::int64_t device_id) {
  if (profile.device_variation == 0) return 1.0;
  std::mt19937_64 rng(derive_seed(static_cast<std::uint64_t>(device_id),
                                  {static_cast<std::uint64_t>(profile.model_label)}));
  std::normal_distribution<double> normal;
  return std::exp(profile.device_variation * normal(rng));
}

}  // namespace

TimingGroup generate_timing_group(const ModelProfile& profile, std::int64_t device_id,
                                  std::uint64_t rng_seed, std::size_t group_size) {
  profile.validate();
  if (group_size < 2) throw ConfigError("group size must be at least 2");

  const double base = profile.base_time * device_factor(profile, device_id);
  const double sigma = profile.dispersion / profile.base_time;

  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution spike(profile.spike_probability);

  TimingGroup group;
  group.device_model = profile.model_label;
  group.device_id = device_id;
  group.samples.resize(group_size);
  for (double& s : group.samples) {
    const double body = std::exp(sigma * normal(rng));
    s = (spike(rng) ? profile.spike_scale * base : base) * body;
  }
  return group;
}

FeatureVector extract_features(const TimingGroup& group) {
  const auto& xs = group.samples;
  const std::size_t n = xs.size();
  if (n < 2) throw InputError("timing group needs at least 2 samples");

  FeatureVector fv;
  fv.model_label = group.device_model;
  fv.device_id = group.device_id;

  std::vector<double> sorted(xs);
  std::sort(sorted.begin(), sorted.end());
  fv.min = sorted.front();
  fv.max = sorted.back();
  fv.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  fv.sum = std::accumulate(xs.begin(), xs.end(), 0.0);
  // Rounding in sum/n can step one ulp outside [min, max] for constant input.
  fv.mean = std::clamp(fv.sum / static_cast<double>(n), fv.min, fv.max);

  double sq = 0;
  for (double x : xs) sq += (x - fv.mean) * (x - fv.mean);
  fv.std_dev = std::sqrt(sq / static_cast<double>(n));

  // Mode over values rounded to 0.1us; sorted order makes the first longest
  // run the smallest tied value.
  {
    double best = std::round(sorted[0] * 10.0) / 10.0;
    std::size_t best_run = 0;
    std::size_t i = 0;
    while (i < n) {
      const double v = std::round(sorted[i] * 10.0) / 10.0;
      std::size_t j = i;
      while (j < n && std::round(sorted[j] * 10.0) / 10.0 == v) ++j;
      if (j - i > best_run) {
        best_run = j - i;
        best = v;
      }
      i = j;
    }
    fv.mode = best;
  }

  bool any_dec = false, any_inc = false;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = xs[i + 1] - xs[i];
    if (d < 0) {
      if (!any_dec) {
        fv.min_decrease = fv.max_decrease = d;
        any_dec = true;
      } else {
        fv.min_decrease = std::min(fv.min_decrease, d);
        fv.max_decrease = std::max(fv.max_decrease, d);
      }
      fv.decrease_sum += d;
    } else if (d > 0) {
      if (!any_inc) {
        fv.min_increase = fv.max_increase = d;
        any_inc = true;
      } else {
        fv.min_increase = std::min(fv.min_increase, d);
        fv.max_increase = std::max(fv.max_increase, d);
      }
      fv.increase_sum += d;
    }
  }
  return fv;
}

void CorpusSpec::validate() const {
  for (std::size_t m = 0; m < kClassCount; ++m) {
    profiles[m].validate();
    if (profiles[m].model_label != kAllModels[m])
      throw ConfigError("profiles must be listed in RPI1..RPI4 order");
    if (device_counts[m] < 1)
      throw ConfigError("device count for " + std::string(to_string(kAllModels[m])) +
                        " must be at least 1");
  }
  if (groups_per_device < 1) throw ConfigError("groups_per_device must be at least 1");
  if (group_size < 2) throw ConfigError("group_size must be at least 2");
  for (std::size_t a = 0; a < kClassCount; ++a)
    for (std::size_t b = a + 1; b < kClassCount; ++b) {
      const auto& p = profiles[a];
      const auto& q = profiles[b];
      if (p.base_time == q.base_time && p.dispersion == q.dispersion &&
          p.spike_probability == q.spike_probability && p.spike_scale == q.spike_scale)
        throw ConfigError("profiles " + std::string(to_string(p.model_label)) + " and " +
                          std::string(to_string(q.model_label)) + " are identical");
    }
}

std::size_t CorpusSpec::row_count() const {
  std::size_t devices = 0;
  for (int c : device_counts) devices += static_cast<std::size_t>(std::max(c, 0));
  return devices * static_cast<std::size_t>(std::max(groups_per_device, 0));
}

std::vector<FeatureVector> build_corpus(const CorpusSpec& spec) {
  spec.validate();
  std::vector<FeatureVector> rows;
  rows.reserve(spec.row_count());
  std::int64_t device_id = 0;
  for (std::size_t m = 0; m < kClassCount; ++m) {
    for (int d = 0; d < spec.device_counts[m]; ++d, ++device_id) {
      for (int g = 0; g < spec.groups_per_device; ++g) {
        const auto seed = derive_seed(spec.seed, {seed_tag::kCorpus,
                                                  static_cast<std::uint64_t>(device_id),
                                                  static_cast<std::uint64_t>(g)});
        rows.push_back(extract_features(
            generate_timing_group(spec.profiles[m], device_id, seed, spec.group_size)));
      }
    }
  }
  return rows;
}

std::vector<FeatureVector> sample_rows(const CorpusSpec& spec, int rows_per_model,
                                       std::int64_t first_device_id, std::uint64_t seed) {
  if (rows_per_model < 1) throw ConfigError("rows_per_model must be at least 1");
  std::vector<FeatureVector> rows;
  for (std::size_t m = 0; m < kClassCount; ++m) {
    const std::int64_t device_id = first_device_id + static_cast<std::int64_t>(m);
    for (int g = 0; g < rows_per_model; ++g) {
      const auto s = derive_seed(seed, {static_cast<std::uint64_t>(device_id),
                                        static_cast<std::uint64_t>(g)});
      rows.push_back(
          extract_features(generate_timing_group(spec.profiles[m], device_id, s, spec.group_size)));
    }
  }
  return rows;
}

}  // namespace fedprint
