#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "fedprint/federation.hpp"

namespace fedprint {

// Label-flipping poisoning of training rows.
struct AttackConfig {
  std::set<int> malicious_org_ids;
  double poison_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Replaces the label of floor(fraction * |train|) uniformly chosen training
// rows with a uniform draw from the other classes. Validation and test rows
// and all features are left alone.
Organization flip_labels(const Organization& org, double fraction, std::uint64_t seed);

struct AttackOutcome {
  std::vector<Organization> orgs;      // poisoned view handed to training
  std::vector<Organization> pristine;  // untouched copies for diffing
  std::vector<std::pair<int, std::size_t>> poisoned_rows;  // (org_id, rows flipped)
};

AttackOutcome apply_attack(std::span<const Organization> orgs, const AttackConfig& attack);

// Rows whose label differs between the two copies of an org's training data.
std::size_t count_label_differences(const Organization& a, const Organization& b);

}  // namespace fedprint
