#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "fedprint/aggregation.hpp"
#include "fedprint/fingerprint.hpp"
#include "fedprint/mlp.hpp"
#include "fedprint/normalization.hpp"

namespace fedprint {

// Chronological three-way split applied to each device's rows separately:
// the first `train` share, then `validation`, remainder is held out.
struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;

  void validate() const;
};

struct SplitRows {
  std::vector<FeatureVector> train, validation, held_out;
};

SplitRows split_chronological(std::span<const FeatureVector> rows, const SplitFractions& f);

struct Organization {
  int org_id = 0;
  // Keys the org's shuffling stream; defaults to org_id.
  std::uint64_t rng_stream = 0;
  std::vector<FeatureVector> train;
  std::vector<FeatureVector> validation;
  std::vector<FeatureVector> test;  // contribution to the global test set
  std::set<DeviceModel> models_present;
};

struct PartitionSpec {
  int org_count = 5;
  // models_per_org[k] maps each device model org k holds to its dealing
  // weight: the number of that model's devices it takes per dealing cycle.
  std::vector<std::map<DeviceModel, int>> models_per_org = default_distribution();
  SplitFractions split;

  static std::vector<std::map<DeviceModel, int>> default_distribution();
  void validate() const;
};

// Deals each model's devices over the orgs holding that model, cycling
// through them in org order with each org taking `weight` consecutive
// devices per cycle (devices in first-appearance order). A device's rows all
// land in one org.
std::vector<Organization> partition_scenario(std::span<const FeatureVector> corpus,
                                             const PartitionSpec& spec);

// Global bounds from every org's training rows.
MinMaxBounds normalization_handshake(std::span<const Organization> orgs);

// Org data after the handshake, ready for training.
struct PreparedOrg {
  int org_id = 0;
  std::uint64_t rng_stream = 0;
  Dataset train;
  Dataset validation;
};

std::vector<PreparedOrg> prepare_orgs(std::span<const Organization> orgs,
                                      const MinMaxBounds& bounds);

// Union of the orgs' held-out rows, in org order.
std::vector<FeatureVector> global_test_rows(std::span<const Organization> orgs);

struct FederatedOptions {
  MlpArchitecture architecture;
  AdamConfig adam;
  int rounds = 90;
  int local_epochs = 1;
  double client_fraction = 1.0;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  bool parallel_clients = false;

  void validate() const;
};

struct OrgAccuracy {
  int org_id = 0;
  double accuracy = 0;
};

struct RoundMetrics {
  int round = 0;  // 1-based
  std::vector<OrgAccuracy> org_validation;
  double test_accuracy = 0;
  ConfusionMatrix confusion{};
  std::vector<int> participants;
  std::vector<int> selected_orgs;
};

struct FederatedResult {
  ModelWeights weights;
  std::vector<RoundMetrics> rounds;
};

// Seed of one client's local epoch; shared with callers that need to replay
// a client's training outside the federation.
std::uint64_t client_epoch_seed(std::uint64_t seed, int round, std::uint64_t rng_stream,
                                int epoch);
std::uint64_t initial_weights_seed(std::uint64_t seed);

using RoundCallback = std::function<void(const RoundMetrics&)>;

FederatedResult run_federated(std::span<const PreparedOrg> orgs, const Dataset& global_test,
                              const FederatedOptions& options, const Aggregator& aggregator,
                              const RoundCallback& on_round = {});

struct CentralizedOptions {
  MlpArchitecture architecture;
  AdamConfig adam;
  int max_epochs = 100;
  int patience = 20;
  std::size_t batch_size = 128;
  // 80% train+validation (validation is the last 10% of the total),
  // 20% test.
  SplitFractions split{0.7, 0.1};
  std::uint64_t seed = 0;

  void validate() const;
};

struct CentralizedResult {
  ModelWeights weights;
  MinMaxBounds bounds;
  std::vector<double> validation_accuracy;  // per epoch
  std::vector<double> train_loss;           // per epoch
  int best_epoch = 0;                       // 1-based
  int epochs_run = 0;
  Evaluation test;
  std::size_t train_rows = 0, validation_rows = 0, test_rows = 0;
};

CentralizedResult run_centralized(std::span<const FeatureVector> corpus,
                                  const CentralizedOptions& options);

}  // namespace fedprint
