#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "fedprint/adversary.hpp"
#include "fedprint/aggregation.hpp"
#include "fedprint/dataset_io.hpp"
#include "fedprint/federation.hpp"
#include "fedprint/fingerprint.hpp"

namespace fedprint {

// Attack matrix: every aggregator x every malicious-org count x every poison
// fraction, plus one clean run per aggregator.
struct MatrixSpec {
  std::vector<AggregatorKind> aggregators = {AggregatorKind::FedAvg, AggregatorKind::CoordMedian,
                                             AggregatorKind::Krum, AggregatorKind::Zeno};
  std::vector<int> malicious_counts = {1, 2, 3};
  // The first n entries are the malicious orgs of an n-org cell.
  std::vector<int> malicious_order = {1, 2, 4};
  std::vector<double> fractions = {0.25, 0.5, 0.75, 1.0};
  int replications = 1;

  void validate(int org_count) const;
};

// Everything a run needs. Loaded from a JSON document with the sections
// "generator", "model", "centralized", "federated", "aggregation",
// "attack", "matrix" and "dataset"; every key is optional.
struct ScenarioConfig {
  std::uint64_t seed = 42;

  CorpusSpec generator;

  MlpArchitecture architecture;
  AdamConfig adam;
  std::size_t batch_size = 128;

  int max_epochs = 100;
  int patience = 20;
  SplitFractions centralized_split{0.7, 0.1};

  PartitionSpec partition;
  int rounds = 90;
  int local_epochs = 1;
  double client_fraction = 1.0;
  bool parallel_clients = false;

  AggregatorSpec aggregation;
  int server_validation_rows = 256;

  AttackConfig attack;
  MatrixSpec matrix;
  DatasetSchema dataset_schema;

  void validate() const;

  FederatedOptions federated_options() const;
  CentralizedOptions centralized_options() const;
};

ScenarioConfig config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ScenarioConfig& config);
ScenarioConfig load_config(const std::filesystem::path& path);

// SHA-256 (hex) of the canonical JSON form of the config.
std::string config_hash(const ScenarioConfig& config);

}  // namespace fedprint
