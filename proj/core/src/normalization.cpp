#include "fedprint/normalization.hpp"

#include <algorithm>

#include "fedprint/errors.hpp"

namespace fedprint {

MinMaxBounds fit_bounds(std::span<const FeatureVector> rows) {
  if (rows.empty()) throw InputError("cannot fit min-max bounds on zero rows");
  MinMaxBounds b;
  b.min = b.max = rows.front().features();
  for (const auto& r : rows) {
    const auto f = r.features();
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      b.min[i] = std::min(b.min[i], f[i]);
      b.max[i] = std::max(b.max[i], f[i]);
    }
  }
  return b;
}

MinMaxBounds merge_bounds(std::span<const MinMaxBounds> parts) {
  if (parts.empty()) throw InputError("no bounds to merge");
  MinMaxBounds b = parts.front();
  for (const auto& p : parts)
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      b.min[i] = std::min(b.min[i], p.min[i]);
      b.max[i] = std::max(b.max[i], p.max[i]);
    }
  return b;
}

double scale_feature(const MinMaxBounds& b, std::size_t i, double v) {
  const double range = b.max[i] - b.min[i];
  return range > 0 ? (v - b.min[i]) / range : 0.0;
}

Dataset to_dataset(std::span<const FeatureVector> rows, const MinMaxBounds& bounds) {
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kFeatureCount));
  d.y.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto f = rows[r].features();
    for (std::size_t i = 0; i < kFeatureCount; ++i)
      d.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = scale_feature(bounds, i, f[i]);
    d.y.push_back(class_index(rows[r].model_label));
  }
  return d;
}

}  // namespace fedprint
