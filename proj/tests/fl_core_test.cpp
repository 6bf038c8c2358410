#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "fedprint/errors.hpp"
#include "fedprint/federation.hpp"

using namespace fedprint;

namespace {

std::vector<FeatureVector> small_corpus(int devices_per_model = 2, int groups = 40, std::uint64_t seed = 1) {
  CorpusSpec spec;
  spec.device_counts = {devices_per_model, devices_per_model, devices_per_model, devices_per_model};
  spec.groups_per_device = groups;
  spec.group_size = 100;
  spec.seed = seed;
  return build_corpus(spec);
}

std::vector<FeatureVector> all_rows(const Organization& o) {
  auto v = o.train;
  v.insert(v.end(), o.validation.begin(), o.validation.end());
  v.insert(v.end(), o.test.begin(), o.test.end());
  return v;
}

// Orders rows by (device, sum) so corpora can be compared as multisets.
bool row_less(const FeatureVector& a, const FeatureVector& b) {
  return std::tie(a.device_id, a.sum, a.max) < std::tie(b.device_id, b.sum, b.max);
}

FederatedOptions tiny_options(int rounds) {
  FederatedOptions opt;
  opt.architecture = MlpArchitecture{{13, 16, 4}};
  opt.rounds = rounds;
  opt.batch_size = 32;
  opt.seed = 9;
  return opt;
}

PartitionSpec single_org() {
  PartitionSpec p;
  p.org_count = 1;
  p.models_per_org = {{{DeviceModel::RPI1, 1}, {DeviceModel::RPI2, 1}, {DeviceModel::RPI3, 1}, {DeviceModel::RPI4, 1}}};
  return p;
}

}  // namespace

TEST(Partition, SingleOrgHoldsEverything) {
  const auto corpus = small_corpus();
  const auto orgs = partition_scenario(corpus, single_org());
  ASSERT_EQ(orgs.size(), 1u);
  auto rows = all_rows(orgs[0]);
  EXPECT_EQ(rows.size(), corpus.size());
  EXPECT_EQ(orgs[0].models_present.size(), 4u);
}

TEST(Partition, DefaultDistributionRespectsModelSets) {
  const auto corpus = small_corpus(4, 20);
  const auto orgs = partition_scenario(corpus, PartitionSpec{});
  ASSERT_EQ(orgs.size(), 5u);
  for (const auto& r : all_rows(orgs[0])) EXPECT_EQ(r.model_label, DeviceModel::RPI4);
  EXPECT_EQ(orgs[0].models_present, std::set<DeviceModel>{DeviceModel::RPI4});
  EXPECT_EQ(orgs[3].models_present, (std::set<DeviceModel>{DeviceModel::RPI1, DeviceModel::RPI3}));
  EXPECT_EQ(orgs[4].models_present.size(), 4u);
}

TEST(Partition, UnionIsCorpusAndOrgsAreDisjoint) {
  const auto corpus = small_corpus(4, 60);  // 960 rows
  const auto orgs = partition_scenario(corpus, PartitionSpec{});
  std::vector<FeatureVector> merged;
  std::map<std::int64_t, int> device_owner;
  for (const auto& o : orgs)
    for (const auto& r : all_rows(o)) {
      merged.push_back(r);
      auto [it, fresh] = device_owner.emplace(r.device_id, o.org_id);
      EXPECT_EQ(it->second, o.org_id) << "device " << r.device_id << " split across orgs";
    }
  auto expect = corpus;
  std::sort(merged.begin(), merged.end(), row_less);
  std::sort(expect.begin(), expect.end(), row_less);
  EXPECT_EQ(merged, expect);
}

TEST(Partition, WeightsDealDevicesInBlocks) {
  const auto corpus = small_corpus(6, 10);
  PartitionSpec p;
  p.org_count = 2;
  p.models_per_org = {{{DeviceModel::RPI1, 2}, {DeviceModel::RPI2, 1}},
                      {{DeviceModel::RPI1, 1}, {DeviceModel::RPI2, 1}, {DeviceModel::RPI3, 1}, {DeviceModel::RPI4, 1}}};
  const auto orgs = partition_scenario(corpus, p);
  std::set<std::int64_t> rpi1_org0;
  for (const auto& r : all_rows(orgs[0]))
    if (r.model_label == DeviceModel::RPI1) rpi1_org0.insert(r.device_id);
  // RPI1 devices 0..5 dealt as 0,0,1,0,0,1
  EXPECT_EQ(rpi1_org0, (std::set<std::int64_t>{0, 1, 3, 4}));
}

TEST(Partition, ChronologicalSplitPerDevice) {
  const auto corpus = small_corpus(1, 50);
  const auto orgs = partition_scenario(corpus, single_org());
  const auto& o = orgs[0];
  EXPECT_EQ(o.train.size(), 160u);
  EXPECT_EQ(o.validation.size(), 20u);
  EXPECT_EQ(o.test.size(), 20u);
  // device 0 occupies the first 50 corpus rows: train is the first 40 of them
  std::vector<FeatureVector> dev0_train;
  for (const auto& r : o.train)
    if (r.device_id == 0) dev0_train.push_back(r);
  EXPECT_EQ(dev0_train, std::vector<FeatureVector>(corpus.begin(), corpus.begin() + 40));
}

TEST(Partition, EmptyOrgIsConfigError) {
  const auto corpus = small_corpus(1, 5);
  PartitionSpec p;  // five orgs but only one device per model
  EXPECT_THROW(partition_scenario(corpus, p), ConfigError);
}

TEST(Handshake, ComponentwiseExtremes) {
  Organization a, b;
  FeatureVector r;
  r.min = 1;
  r.max = 4;
  a.train.push_back(r);
  r.min = 5;
  r.max = 2;
  a.train.push_back(r);
  r.min = 3;
  r.max = 7;
  b.train.push_back(r);
  r.min = 2;
  r.max = 1;
  b.train.push_back(r);
  const auto g = normalization_handshake(std::vector<Organization>{a, b});
  EXPECT_EQ(g.min[0], 1);
  EXPECT_EQ(g.max[0], 5);
  EXPECT_EQ(g.min[1], 1);
  EXPECT_EQ(g.max[1], 7);
}

TEST(Handshake, SpecExampleMinima) {
  MinMaxBounds x{}, y{};
  x.min[0] = 1, x.min[1] = 5;
  y.min[0] = 3, y.min[1] = 2;
  const auto m = merge_bounds(std::vector<MinMaxBounds>{x, y});
  EXPECT_EQ(m.min[0], 1);
  EXPECT_EQ(m.min[1], 2);
}

TEST(Handshake, SingleOrgEqualsLocalBounds) {
  const auto orgs = partition_scenario(small_corpus(), single_org());
  EXPECT_EQ(normalization_handshake(orgs), fit_bounds(orgs[0].train));
}

TEST(Handshake, TestRowsNeverMoveBounds) {
  auto orgs = partition_scenario(small_corpus(), single_org());
  const auto before = normalization_handshake(orgs);
  for (auto& r : orgs[0].test) r.max *= 1000, r.min = -1;
  for (auto& r : orgs[0].validation) r.max *= 1000;
  EXPECT_EQ(normalization_handshake(orgs), before);
}

TEST(Handshake, TrainScaledIntoUnitRangeTestNotClipped) {
  const auto orgs = partition_scenario(small_corpus(4, 20), PartitionSpec{});
  const auto bounds = normalization_handshake(orgs);
  const auto prepared = prepare_orgs(orgs, bounds);
  for (const auto& p : prepared) {
    EXPECT_GE(p.train.x.minCoeff(), 0.0);
    EXPECT_LE(p.train.x.maxCoeff(), 1.0);
  }
  FeatureVector outside = orgs[0].test.front();
  outside.max = bounds.max[1] * 2 + 1;
  const auto ds = to_dataset(std::vector<FeatureVector>{outside}, bounds);
  EXPECT_GT(ds.x(0, 1), 1.0);
  EXPECT_EQ(scale_feature(MinMaxBounds{}, 0, 123.0), 0.0);
}

TEST(Federated, ZeroRoundsReturnsInitialWeights) {
  const auto orgs = partition_scenario(small_corpus(), single_org());
  const auto prepared = prepare_orgs(orgs, normalization_handshake(orgs));
  const auto opt = tiny_options(0);
  const auto res = run_federated(prepared, Dataset{}, opt, Aggregator(AggregatorSpec{}));
  EXPECT_TRUE(res.weights == init_weights(opt.architecture, initial_weights_seed(opt.seed)));
  EXPECT_TRUE(res.rounds.empty());
}

TEST(Federated, SingleOrgFedAvgReplaysLocalTraining) {
  const auto orgs = partition_scenario(small_corpus(), single_org());
  const auto prepared = prepare_orgs(orgs, normalization_handshake(orgs));
  auto opt = tiny_options(4);
  opt.local_epochs = 2;
  const auto res = run_federated(prepared, Dataset{}, opt, Aggregator(AggregatorSpec{}));

  auto w = init_weights(opt.architecture, initial_weights_seed(opt.seed));
  for (int t = 1; t <= opt.rounds; ++t) {
    auto adam = AdamState::fresh(opt.architecture, opt.adam);
    for (int e = 0; e < opt.local_epochs; ++e)
      train_epoch(w, adam, prepared[0].train, opt.batch_size,
                  client_epoch_seed(opt.seed, t, prepared[0].rng_stream, e));
  }
  EXPECT_LE((flatten(res.weights) - flatten(w)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Federated, IdenticalOrgsAverageToEitherUpdate) {
  const auto orgs = partition_scenario(small_corpus(), single_org());
  auto prepared = prepare_orgs(orgs, normalization_handshake(orgs));
  prepared.push_back(prepared[0]);
  prepared[1].org_id = 1;  // same rng_stream, same data
  auto opt = tiny_options(1);
  const auto res = run_federated(prepared, Dataset{}, opt, Aggregator(AggregatorSpec{}));

  auto w = init_weights(opt.architecture, initial_weights_seed(opt.seed));
  auto adam = AdamState::fresh(opt.architecture, opt.adam);
  train_epoch(w, adam, prepared[0].train, opt.batch_size, client_epoch_seed(opt.seed, 1, prepared[0].rng_stream, 0));
  EXPECT_LE((flatten(res.weights) - flatten(w)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Federated, MetricsPerRoundAndDeterminism) {
  const auto corpus = small_corpus(4, 20);
  const auto orgs = partition_scenario(corpus, PartitionSpec{});
  const auto bounds = normalization_handshake(orgs);
  const auto prepared = prepare_orgs(orgs, bounds);
  const auto test = to_dataset(global_test_rows(orgs), bounds);
  auto opt = tiny_options(3);
  opt.client_fraction = 0.6;  // m = 3 of 5
  const Aggregator agg(AggregatorSpec{});
  const auto a = run_federated(prepared, test, opt, agg);
  const auto b = run_federated(prepared, test, opt, agg);
  ASSERT_EQ(a.rounds.size(), 3u);
  EXPECT_TRUE(a.weights == b.weights);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_EQ(a.rounds[t].round, int(t) + 1);
    EXPECT_EQ(a.rounds[t].participants.size(), 3u);
    EXPECT_EQ(a.rounds[t].participants, b.rounds[t].participants);
    EXPECT_EQ(a.rounds[t].test_accuracy, b.rounds[t].test_accuracy);
    EXPECT_EQ(a.rounds[t].org_validation.size(), 3u);
  }
  auto par = opt;
  par.parallel_clients = true;
  EXPECT_TRUE(run_federated(prepared, test, par, agg).weights == a.weights);
}

TEST(Federated, OptionValidation) {
  auto opt = tiny_options(1);
  opt.client_fraction = 0;
  EXPECT_THROW(opt.validate(), ConfigError);
  opt = tiny_options(-1);
  EXPECT_THROW(opt.validate(), ConfigError);
}

TEST(Centralized, PatienceZeroStopsAtFirstPlateau) {
  const auto corpus = small_corpus(2, 30);
  CentralizedOptions opt;
  opt.architecture = MlpArchitecture{{13, 16, 4}};
  opt.max_epochs = 50;
  opt.patience = 0;
  opt.batch_size = 32;
  const auto res = run_centralized(corpus, opt);
  ASSERT_GE(res.epochs_run, 2);
  ASSERT_EQ(res.validation_accuracy.size(), std::size_t(res.epochs_run));
  // every epoch but the last improved on the best so far
  for (int e = 1; e + 1 < res.epochs_run; ++e)
    EXPECT_GT(res.validation_accuracy[e], res.validation_accuracy[e - 1]);
  if (res.epochs_run < opt.max_epochs)
    EXPECT_LE(res.validation_accuracy.back(), res.validation_accuracy[res.epochs_run - 2]);
}

TEST(Centralized, BoundsComeFromTrainRowsOnly) {
  auto corpus = small_corpus(1, 50);
  CentralizedOptions opt;
  opt.architecture = MlpArchitecture{{13, 8, 4}};
  opt.max_epochs = 1;
  const auto clean = run_centralized(corpus, opt);
  // device 0 owns corpus rows 0..49; its first 35 are training rows
  for (std::size_t i = 35; i < 50; ++i) corpus[i].max = 1e9;
  const auto tampered = run_centralized(corpus, opt);
  EXPECT_EQ(clean.bounds, tampered.bounds);
  EXPECT_EQ(clean.train_rows, 140u);
  EXPECT_EQ(clean.validation_rows, 20u);
  EXPECT_EQ(clean.test_rows, 40u);
}
