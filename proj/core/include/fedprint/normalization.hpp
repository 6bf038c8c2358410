#pragma once

#include <array>
#include <span>
#include <vector>

#include "fedprint/fingerprint.hpp"
#include "fedprint/mlp.hpp"

namespace fedprint {

// Per-feature min-max bounds: x' = (x - min) / (max - min). Features with
// max == min map to 0. Values outside the bounds are not clipped.
struct MinMaxBounds {
  std::array<double, kFeatureCount> min{};
  std::array<double, kFeatureCount> max{};

  bool operator==(const MinMaxBounds&) const = default;
};

MinMaxBounds fit_bounds(std::span<const FeatureVector> rows);

// Componentwise min of the minima and max of the maxima.
MinMaxBounds merge_bounds(std::span<const MinMaxBounds> parts);

double scale_feature(const MinMaxBounds& b, std::size_t feature, double value);

Dataset to_dataset(std::span<const FeatureVector> rows, const MinMaxBounds& bounds);

}  // namespace fedprint
