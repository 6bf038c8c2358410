#include "fedprint/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "fedprint/errors.hpp"
#include "fedprint/seeding.hpp"

namespace fedprint {

void AttackConfig::validate() const {
  if (!(poison_fraction >= 0 && poison_fraction <= 1))
    throw ConfigError("poison_fraction must lie in [0, 1]");
}

Organization flip_labels(const Organization& org, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0 && fraction <= 1)) throw ConfigError("poison fraction must lie in [0, 1]");
  Organization out = org;
  const auto n = out.train.size();
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  if (count == 0) return out;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `count` entries are a uniform sample
  // without replacement.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::uniform_int_distribution<int> other(0, static_cast<int>(kClassCount) - 2);
  for (std::size_t i = 0; i < count; ++i) {
    auto& row = out.train[idx[i]];
    const int original = class_index(row.model_label);
    const int draw = other(rng);
    row.model_label = model_from_index(draw < original ? draw : draw + 1);
  }
  out.models_present.clear();
  for (const auto* part : {&out.train, &out.validation, &out.test})
    for (const auto& r : *part) out.models_present.insert(r.model_label);
  return out;
}

AttackOutcome apply_attack(std::span<const Organization> orgs, const AttackConfig& attack) {
  attack.validate();
  for (int id : attack.malicious_org_ids) {
    const bool known = std::any_of(orgs.begin(), orgs.end(),
                                   [id](const Organization& o) { return o.org_id == id; });
    if (!known) throw ConfigError("malicious org " + std::to_string(id) + " does not exist");
  }
  AttackOutcome out;
  out.pristine.assign(orgs.begin(), orgs.end());
  for (const auto& o : orgs) {
    if (attack.malicious_org_ids.count(o.org_id) == 0) {
      out.orgs.push_back(o);
      continue;
    }
    auto poisoned = flip_labels(
        o, attack.poison_fraction,
        derive_seed(attack.seed, {seed_tag::kAttack, static_cast<std::uint64_t>(o.org_id)}));
    out.poisoned_rows.emplace_back(o.org_id, count_label_differences(o, poisoned));
    out.orgs.push_back(std::move(poisoned));
  }
  return out;
}

std::size_t count_label_differences(const Organization& a, const Organization& b) {
  if (a.train.size() != b.train.size()) throw InputError("organizations differ in size");
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.train.size(); ++i)
    if (a.train[i].model_label != b.train[i].model_label) ++diff;
  return diff;
}

}  // namespace fedprint
