#pragma once

#include <array>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedprint/config.hpp"

namespace fedprint {

inline constexpr int kMetricsSchemaVersion = 1;

// Process exit codes (sysexits-style).
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 64,
  kExitData = 65,
  kExitRuntime = 70,
  kExitConfig = 78,
};

int exit_code_for(const std::exception& e);

enum class TrainMode { Centralized, Federated };
std::optional<TrainMode> parse_mode(std::string_view text);

struct GenerateSummary {
  std::size_t rows = 0;
  std::array<std::size_t, kClassCount> rows_per_model{};
};

GenerateSummary cmd_generate(const ScenarioConfig& config, const std::filesystem::path& out_path);

// Clean rows the server holds for Zeno scoring; never given to clients.
std::vector<FeatureVector> server_validation_rows(const ScenarioConfig& config);

struct FederatedRun {
  FederatedResult result;
  MinMaxBounds bounds;
  AggregatorSpec aggregator;
  AttackConfig attack;
  std::vector<std::pair<int, std::size_t>> poisoned_rows;
  std::vector<Organization> orgs;  // pristine partition
  Evaluation final_test;
};

// partition -> attack -> handshake -> round loop, all from `config`.
// `aggregator` and `attack` override the config's own sections.
FederatedRun run_federated_scenario(std::span<const FeatureVector> corpus, const ScenarioConfig& config,
                                    const AggregatorSpec& aggregator, const AttackConfig& attack);
FederatedRun run_federated_scenario(std::span<const FeatureVector> corpus, const ScenarioConfig& config);

nlohmann::json federated_metrics(const ScenarioConfig& config, const FederatedRun& run);
nlohmann::json centralized_metrics(const ScenarioConfig& config, const CentralizedResult& run);

std::string confusion_csv(const ConfusionMatrix& confusion);
std::string curves_csv(std::span<const RoundMetrics> rounds);

struct TrainOutputs {
  TrainMode mode = TrainMode::Centralized;
  double test_accuracy = 0;
  ConfusionMatrix confusion{};
  nlohmann::json metrics;
  std::filesystem::path metrics_path, confusion_path, checkpoint_path, curves_path;
};

// Writes metrics.json, confusion.csv, checkpoint.json (and curves.csv for
// federated runs) into out_dir.
TrainOutputs cmd_train(const std::filesystem::path& dataset_path, const ScenarioConfig& config,
                       TrainMode mode, const std::filesystem::path& out_dir);

Evaluation cmd_eval(const std::filesystem::path& checkpoint_path,
                    const std::filesystem::path& dataset_path, const DatasetSchema& schema = {});

struct MatrixCell {
  AggregatorKind aggregator = AggregatorKind::FedAvg;
  int n_malicious = 0;  // 0 = clean baseline
  double fraction = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::vector<int> malicious_orgs;

  bool ok = false;
  std::string error;
  double accuracy = 0;
  ConfusionMatrix confusion{};
  std::vector<double> test_curve;
  std::vector<std::vector<int>> selected_orgs;  // per round
  std::vector<std::pair<int, std::size_t>> poisoned_rows;
};

struct MatrixReport {
  std::string config_hash;
  std::vector<MatrixCell> cells;
};

// Cells in report order: per aggregator, per replicate, the clean baseline
// followed by every (count, fraction) pair.
std::vector<MatrixCell> plan_matrix(const ScenarioConfig& config);

std::uint64_t replicate_seed(std::uint64_t seed, int replicate);

MatrixReport run_attack_matrix(std::span<const FeatureVector> corpus, const ScenarioConfig& config,
                               bool parallel = false);

nlohmann::json matrix_json(const ScenarioConfig& config, const MatrixReport& report);
std::string matrix_csv(const MatrixReport& report);

MatrixReport cmd_attack_matrix(const std::filesystem::path& dataset_path, const ScenarioConfig& config,
                               const std::filesystem::path& out_dir, bool parallel = false);

}  // namespace fedprint
