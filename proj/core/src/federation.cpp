#include "fedprint/federation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>

#include "fedprint/errors.hpp"
#include "fedprint/seeding.hpp"

namespace fedprint {

void SplitFractions::validate() const {
  if (!(train > 0) || !(validation >= 0) || !(train + validation <= 1.0 + 1e-12))
    throw ConfigError("split fractions must satisfy train > 0, validation >= 0, train + validation <= 1");
}

SplitRows split_chronological(std::span<const FeatureVector> rows, const SplitFractions& f) {
  f.validate();
  // Device ids in first-appearance order, rows per device in file order.
  std::vector<std::int64_t> order;
  std::map<std::int64_t, std::vector<const FeatureVector*>> by_device;
  for (const auto& r : rows) {
    auto [it, inserted] = by_device.try_emplace(r.device_id);
    if (inserted) order.push_back(r.device_id);
    it->second.push_back(&r);
  }
  SplitRows out;
  for (auto id : order) {
    const auto& dev = by_device[id];
    const auto n = static_cast<double>(dev.size());
    const auto n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n * f.train)));
    const auto n_fit = std::max(
        n_train, std::min(dev.size(), static_cast<std::size_t>(std::llround(n * (f.train + f.validation)))));
    for (std::size_t i = 0; i < dev.size(); ++i) {
      auto& bucket = i < n_train ? out.train : i < n_fit ? out.validation : out.held_out;
      bucket.push_back(*dev[i]);
    }
  }
  return out;
}

std::vector<std::map<DeviceModel, int>> PartitionSpec::default_distribution() {
  using M = DeviceModel;
  return {{{M::RPI4, 1}},
          {{M::RPI1, 1}, {M::RPI4, 1}},
          {{M::RPI2, 1}, {M::RPI3, 1}},
          {{M::RPI1, 1}, {M::RPI3, 1}},
          {{M::RPI1, 1}, {M::RPI2, 1}, {M::RPI3, 1}, {M::RPI4, 1}}};
}

void PartitionSpec::validate() const {
  if (org_count < 1) throw ConfigError("org_count must be at least 1");
  if (models_per_org.size() != static_cast<std::size_t>(org_count))
    throw ConfigError("distribution lists " + std::to_string(models_per_org.size()) +
                      " organizations, org_count is " + std::to_string(org_count));
  for (const auto& org : models_per_org)
    for (const auto& [model, weight] : org)
      if (weight < 1) throw ConfigError("device dealing weights must be at least 1");
  split.validate();
}

std::vector<Organization> partition_scenario(std::span<const FeatureVector> corpus,
                                             const PartitionSpec& spec) {
  spec.validate();
  if (corpus.empty()) throw InputError("cannot partition an empty corpus");

  std::vector<Organization> orgs(static_cast<std::size_t>(spec.org_count));
  std::array<std::vector<int>, kClassCount> holders;
  for (int k = 0; k < spec.org_count; ++k) {
    orgs[static_cast<std::size_t>(k)].org_id = k;
    orgs[static_cast<std::size_t>(k)].rng_stream = static_cast<std::uint64_t>(k);
    for (const auto& [model, weight] : spec.models_per_org[static_cast<std::size_t>(k)])
      holders[static_cast<std::size_t>(class_index(model))].insert(
          holders[static_cast<std::size_t>(class_index(model))].end(), static_cast<std::size_t>(weight), k);
  }

  // Device -> org assignment, dealt per model in first-appearance order.
  std::map<std::int64_t, int> device_org;
  std::array<std::size_t, kClassCount> dealt{};
  std::vector<std::vector<FeatureVector>> org_rows(orgs.size());
  for (const auto& r : corpus) {
    auto it = device_org.find(r.device_id);
    if (it == device_org.end()) {
      const auto m = static_cast<std::size_t>(class_index(r.model_label));
      if (holders[m].empty())
        throw ConfigError("no organization holds device model " + std::string(to_string(r.model_label)));
      const int org = holders[m][dealt[m]++ % holders[m].size()];
      it = device_org.emplace(r.device_id, org).first;
    }
    org_rows[static_cast<std::size_t>(it->second)].push_back(r);
  }

  for (std::size_t k = 0; k < orgs.size(); ++k) {
    if (org_rows[k].empty())
      throw ConfigError("organization " + std::to_string(k) + " received no rows");
    auto split = split_chronological(org_rows[k], spec.split);
    orgs[k].train = std::move(split.train);
    orgs[k].validation = std::move(split.validation);
    orgs[k].test = std::move(split.held_out);
    for (const auto& r : org_rows[k]) orgs[k].models_present.insert(r.model_label);
  }
  return orgs;
}

MinMaxBounds normalization_handshake(std::span<const Organization> orgs) {
  if (orgs.empty()) throw InputError("handshake needs at least one organization");
  std::vector<MinMaxBounds> local;
  for (const auto& o : orgs) {
    if (o.train.empty())
      throw InputError("organization " + std::to_string(o.org_id) + " has no training rows");
    local.push_back(fit_bounds(o.train));
  }
  return merge_bounds(local);
}

std::vector<PreparedOrg> prepare_orgs(std::span<const Organization> orgs,
                                      const MinMaxBounds& bounds) {
  std::vector<PreparedOrg> out;
  for (const auto& o : orgs)
    out.push_back({o.org_id, o.rng_stream, to_dataset(o.train, bounds), to_dataset(o.validation, bounds)});
  return out;
}

std::vector<FeatureVector> global_test_rows(std::span<const Organization> orgs) {
  std::vector<FeatureVector> rows;
  for (const auto& o : orgs) rows.insert(rows.end(), o.test.begin(), o.test.end());
  return rows;
}

void FederatedOptions::validate() const {
  architecture.validate();
  if (rounds < 0) throw ConfigError("rounds must be non-negative");
  if (local_epochs < 1) throw ConfigError("local_epochs must be at least 1");
  if (!(client_fraction > 0 && client_fraction <= 1))
    throw ConfigError("client_fraction must lie in (0, 1]");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
}

std::uint64_t client_epoch_seed(std::uint64_t seed, int round, std::uint64_t rng_stream, int epoch) {
  return derive_seed(seed, {seed_tag::kClientTrain, static_cast<std::uint64_t>(round), rng_stream,
                            static_cast<std::uint64_t>(epoch)});
}

std::uint64_t initial_weights_seed(std::uint64_t seed) {
  return derive_seed(seed, {seed_tag::kInit});
}

namespace {

struct LocalResult {
  ClientUpdate update;
  std::optional<double> validation_accuracy;
};

LocalResult local_update(const PreparedOrg& org, const ModelWeights& global,
                         const FederatedOptions& opt, int round) {
  LocalResult r;
  r.update.org_id = org.org_id;
  r.update.weights = global;
  r.update.sample_count = static_cast<std::int64_t>(org.train.size());
  auto adam = AdamState::fresh(opt.architecture, opt.adam);
  for (int e = 0; e < opt.local_epochs; ++e)
    train_epoch(r.update.weights, adam, org.train, opt.batch_size,
                client_epoch_seed(opt.seed, round, org.rng_stream, e));
  if (!org.validation.empty())
    r.validation_accuracy = evaluate(r.update.weights, org.validation).accuracy;
  return r;
}

template <typename E>
[[noreturn]] void rethrow_with_round(const E& e, int round) {
  throw E("round " + std::to_string(round) + ": " + e.what());
}

}  // namespace

FederatedResult run_federated(std::span<const PreparedOrg> orgs, const Dataset& global_test,
                              const FederatedOptions& opt, const Aggregator& aggregator,
                              const RoundCallback& on_round) {
  opt.validate();
  if (orgs.empty()) throw InputError("federation needs at least one organization");
  for (const auto& o : orgs)
    if (o.train.empty())
      throw InputError("organization " + std::to_string(o.org_id) + " has no training rows");

  FederatedResult result;
  result.weights = init_weights(opt.architecture, initial_weights_seed(opt.seed));

  const int k = static_cast<int>(orgs.size());
  const int m = std::max(1, static_cast<int>(std::floor(opt.client_fraction * k + 1e-9)));

  for (int t = 1; t <= opt.rounds; ++t) {
    std::vector<std::size_t> chosen(orgs.size());
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    if (m < k) {
      std::mt19937_64 rng(derive_seed(opt.seed, {seed_tag::kClientSample, static_cast<std::uint64_t>(t)}));
      std::shuffle(chosen.begin(), chosen.end(), rng);
      chosen.resize(static_cast<std::size_t>(m));
      std::sort(chosen.begin(), chosen.end());
    }

    std::vector<LocalResult> locals(chosen.size());
    try {
      if (opt.parallel_clients) {
        std::vector<std::future<LocalResult>> jobs;
        for (auto idx : chosen)
          jobs.push_back(std::async(std::launch::async, local_update, std::cref(orgs[idx]),
                                    std::cref(result.weights), std::cref(opt), t));
        for (std::size_t i = 0; i < jobs.size(); ++i) locals[i] = jobs[i].get();
      } else {
        for (std::size_t i = 0; i < chosen.size(); ++i)
          locals[i] = local_update(orgs[chosen[i]], result.weights, opt, t);
      }
    } catch (const InputError& e) {
      rethrow_with_round(e, t);
    }

    RoundMetrics metrics;
    metrics.round = t;
    std::vector<ClientUpdate> updates;
    for (auto& l : locals) {
      metrics.participants.push_back(l.update.org_id);
      if (l.validation_accuracy)
        metrics.org_validation.push_back({l.update.org_id, *l.validation_accuracy});
      updates.push_back(std::move(l.update));
    }

    AggregationResult agg;
    try {
      agg = aggregator.aggregate(updates, result.weights);
    } catch (const ConfigError& e) {
      rethrow_with_round(e, t);
    } catch (const AggregationError& e) {
      rethrow_with_round(e, t);
    } catch (const InputError& e) {
      rethrow_with_round(e, t);
    }
    result.weights = std::move(agg.weights);
    metrics.selected_orgs = std::move(agg.selected_orgs);

    if (!global_test.empty()) {
      const auto ev = evaluate(result.weights, global_test);
      metrics.test_accuracy = ev.accuracy;
      metrics.confusion = ev.confusion;
    }
    if (on_round) on_round(metrics);
    result.rounds.push_back(std::move(metrics));
  }
  return result;
}

void CentralizedOptions::validate() const {
  architecture.validate();
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (patience < 0) throw ConfigError("patience must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  split.validate();
}

CentralizedResult run_centralized(std::span<const FeatureVector> corpus,
                                  const CentralizedOptions& opt) {
  opt.validate();
  if (corpus.empty()) throw InputError("centralized training needs a non-empty corpus");

  const auto parts = split_chronological(corpus, opt.split);
  CentralizedResult res;
  res.train_rows = parts.train.size();
  res.validation_rows = parts.validation.size();
  res.test_rows = parts.held_out.size();
  res.bounds = fit_bounds(parts.train);
  const Dataset train = to_dataset(parts.train, res.bounds);
  const Dataset validation = to_dataset(parts.validation, res.bounds);
  const Dataset test = to_dataset(parts.held_out, res.bounds);
  // Without a validation split, early stopping monitors training accuracy.
  const Dataset& monitor = validation.empty() ? train : validation;

  ModelWeights weights = init_weights(opt.architecture, initial_weights_seed(opt.seed));
  auto adam = AdamState::fresh(opt.architecture, opt.adam);
  ModelWeights best = weights;
  double best_acc = -1;
  int wait = 0;
  for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    const auto er = train_epoch(weights, adam, train, opt.batch_size,
                                derive_seed(opt.seed, {seed_tag::kCentralTrain,
                                                       static_cast<std::uint64_t>(epoch)}));
    const double acc = evaluate(weights, monitor).accuracy;
    res.train_loss.push_back(er.mean_loss);
    res.validation_accuracy.push_back(acc);
    res.epochs_run = epoch;
    if (acc > best_acc) {
      best_acc = acc;
      best = weights;
      res.best_epoch = epoch;
      wait = 0;
    } else if (++wait >= opt.patience) {
      break;
    }
  }
  res.weights = std::move(best);
  if (!test.empty()) res.test = evaluate(res.weights, test);
  return res;
}

}  // namespace fedprint
