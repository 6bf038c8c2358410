#include "fedprint/aggregation.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "fedprint/errors.hpp"

namespace fedprint {

std::string_view to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::FedAvg: return "fedavg";
    case AggregatorKind::CoordMedian: return "median";
    case AggregatorKind::Krum: return "krum";
    case AggregatorKind::Zeno: return "zeno";
  }
  return "?";
}

std::optional<AggregatorKind> parse_aggregator(std::string_view text) {
  for (auto k : {AggregatorKind::FedAvg, AggregatorKind::CoordMedian, AggregatorKind::Krum,
                 AggregatorKind::Zeno})
    if (text == to_string(k)) return k;
  return std::nullopt;
}

void AggregatorSpec::validate() const {
  if (krum_f < 0) throw ConfigError("krum_f must be non-negative");
  if (zeno_b < 0) throw ConfigError("zeno_b must be non-negative");
  if (!(zeno_rho >= 0)) throw ConfigError("zeno_rho must be non-negative");
  if (!(zeno_gamma > 0)) throw ConfigError("zeno_gamma must be positive");
}

namespace {

struct Prepared {
  MlpArchitecture arch;
  std::vector<const ClientUpdate*> sorted;
  std::vector<Vector> flat;
};

Prepared prepare(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw AggregationError("no client updates to aggregate");
  Prepared p;
  p.arch = updates.front().weights.architecture();
  for (const auto& u : updates) {
    if (u.weights.architecture() != p.arch)
      throw AggregationError("update from org " + std::to_string(u.org_id) +
                             " does not match the model shape");
    if (u.sample_count < 1)
      throw AggregationError("update from org " + std::to_string(u.org_id) + " has no samples");
    p.sorted.push_back(&u);
  }
  std::sort(p.sorted.begin(), p.sorted.end(),
            [](const ClientUpdate* a, const ClientUpdate* b) { return a->org_id < b->org_id; });
  for (std::size_t i = 1; i < p.sorted.size(); ++i)
    if (p.sorted[i]->org_id == p.sorted[i - 1]->org_id)
      throw AggregationError("duplicate update from org " + std::to_string(p.sorted[i]->org_id));
  for (const auto* u : p.sorted) p.flat.push_back(flatten(u->weights));
  return p;
}

std::vector<int> all_orgs(const Prepared& p) {
  std::vector<int> ids;
  for (const auto* u : p.sorted) ids.push_back(u->org_id);
  return ids;
}

}  // namespace

AggregationResult fed_avg(std::span<const ClientUpdate> updates) {
  const auto p = prepare(updates);
  double total = 0;
  for (const auto* u : p.sorted) total += static_cast<double>(u->sample_count);
  Vector acc = Vector::Zero(p.flat.front().size());
  for (std::size_t k = 0; k < p.flat.size(); ++k)
    acc += (static_cast<double>(p.sorted[k]->sample_count) / total) * p.flat[k];
  return {unflatten(p.arch, acc), all_orgs(p), {}};
}

AggregationResult coord_median(std::span<const ClientUpdate> updates) {
  const auto p = prepare(updates);
  const std::size_t k = p.flat.size();
  const Eigen::Index dim = p.flat.front().size();
  Vector out(dim);
  std::vector<double> column(k);
  for (Eigen::Index j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < k; ++i) column[i] = p.flat[i][j];
    std::sort(column.begin(), column.end());
    out[j] = k % 2 == 1 ? column[k / 2] : 0.5 * (column[k / 2 - 1] + column[k / 2]);
  }
  return {unflatten(p.arch, out), all_orgs(p), {}};
}

AggregationResult krum(std::span<const ClientUpdate> updates, int f) {
  if (f < 0) throw ConfigError("krum f must be non-negative");
  const auto count = static_cast<int>(updates.size());
  if (count < f + 3)
    throw ConfigError("krum needs at least f + 3 = " + std::to_string(f + 3) +
                      " updates, got " + std::to_string(count));
  const auto p = prepare(updates);
  const std::size_t k = p.flat.size();
  const std::size_t neighbours = k - static_cast<std::size_t>(f) - 2;

  std::vector<std::vector<double>> dist(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      dist[i][j] = dist[j][i] = (p.flat[i] - p.flat[j]).squaredNorm();

  AggregationResult result;
  std::size_t best = 0;
  double best_score = 0;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> others;
    for (std::size_t j = 0; j < k; ++j)
      if (j != i) others.push_back(dist[i][j]);
    std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(neighbours),
                      others.end());
    const double score = std::accumulate(
        others.begin(), others.begin() + static_cast<std::ptrdiff_t>(neighbours), 0.0);
    result.scores.emplace_back(p.sorted[i]->org_id, score);
    if (i == 0 || score < best_score) {
      best = i;
      best_score = score;
    }
  }
  result.weights = p.sorted[best]->weights;
  result.selected_orgs = {p.sorted[best]->org_id};
  return result;
}

AggregationResult zeno(std::span<const ClientUpdate> updates, const ModelWeights& prev_global,
                       const AggregatorSpec& spec, const Dataset& server_validation) {
  if (server_validation.empty()) throw ConfigError("zeno needs a server validation set");
  if (spec.zeno_b < 0 || static_cast<std::size_t>(spec.zeno_b) >= updates.size())
    throw ConfigError("zeno trims b = " + std::to_string(spec.zeno_b) + " of " +
                      std::to_string(updates.size()) + " updates, leaving none");
  const auto p = prepare(updates);
  if (prev_global.architecture() != p.arch)
    throw AggregationError("previous global model does not match the update shape");

  const Vector prev = flatten(prev_global);
  const double base_loss = cross_entropy(prev_global, server_validation);

  struct Scored {
    std::size_t index;
    double score;
  };
  std::vector<Scored> scored;
  AggregationResult result;
  for (std::size_t i = 0; i < p.flat.size(); ++i) {
    const double descent = base_loss - cross_entropy(p.sorted[i]->weights, server_validation);
    const double score = descent - spec.zeno_rho * (p.flat[i] - prev).squaredNorm();
    scored.push_back({i, score});
    result.scores.emplace_back(p.sorted[i]->org_id, score);
  }
  // Highest score first; equal scores keep the lower org id ahead.
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });
  scored.resize(scored.size() - static_cast<std::size_t>(spec.zeno_b));
  std::sort(scored.begin(), scored.end(),
            [](const Scored& a, const Scored& b) { return a.index < b.index; });

  Vector acc = Vector::Zero(prev.size());
  for (const auto& s : scored) {
    acc += p.flat[s.index];
    result.selected_orgs.push_back(p.sorted[s.index]->org_id);
  }
  acc /= static_cast<double>(scored.size());
  result.weights = unflatten(p.arch, acc);
  return result;
}

Aggregator::Aggregator(AggregatorSpec spec, Dataset server_validation)
    : spec_(spec), server_validation_(std::move(server_validation)) {
  spec_.validate();
  if (spec_.kind == AggregatorKind::Zeno && server_validation_.empty())
    throw ConfigError("zeno needs a non-empty server validation set");
}

AggregationResult Aggregator::aggregate(std::span<const ClientUpdate> updates,
                                        const ModelWeights& prev_global) const {
  switch (spec_.kind) {
    case AggregatorKind::FedAvg: return fed_avg(updates);
    case AggregatorKind::CoordMedian: return coord_median(updates);
    case AggregatorKind::Krum: return krum(updates, spec_.krum_f);
    case AggregatorKind::Zeno: return zeno(updates, prev_global, spec_, server_validation_);
  }
  throw ConfigError("unknown aggregator");
}

}  // namespace fedprint
