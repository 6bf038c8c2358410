// fedprint: synthetic fingerprint generation, centralized/federated training,
// the label-flipping attack matrix, and checkpoint evaluation.

#include <CLI11.hpp>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "fedprint/errors.hpp"
#include "fedprint/harness.hpp"

namespace {

using namespace fedprint;

ScenarioConfig load(const std::string& path, std::optional<std::uint64_t> seed) {
  ScenarioConfig config = path.empty() ? ScenarioConfig{} : load_config(path);
  if (seed) {
    config.seed = *seed;
    config.generator.seed = *seed;
  }
  return config;
}

void print_confusion(const ConfusionMatrix& c) { std::cout << confusion_csv(c); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated device-model identification from execution-time fingerprints"};
  app.require_subcommand(1);

  std::string config_path, dataset_path, out_dir = "out", out_path, mode_text, checkpoint_path;
  std::optional<std::uint64_t> seed;
  bool parallel = false;

  auto* gen = app.add_subcommand("generate", "Build the synthetic corpus and write it as CSV");
  gen->add_option("--config", config_path, "Scenario config (JSON)")->check(CLI::ExistingFile);
  gen->add_option("--out", out_path, "Output CSV path")->required();
  gen->add_option("--seed", seed, "Override the config seed");

  auto* train = app.add_subcommand("train", "Train centrally or federated on a dataset");
  train->add_option("--config", config_path, "Scenario config (JSON)")->check(CLI::ExistingFile);
  train->add_option("--dataset", dataset_path, "Dataset CSV")->required();
  train->add_option("--mode", mode_text, "centralized | federated")
      ->required()
      ->check(CLI::IsMember({"centralized", "federated"}));
  train->add_option("--out-dir", out_dir, "Directory for metrics, confusion matrix, checkpoint");
  train->add_option("--seed", seed, "Override the config seed");

  auto* matrix = app.add_subcommand("attack-matrix", "Run every aggregator against every attack cell");
  matrix->add_option("--config", config_path, "Scenario config (JSON)")->check(CLI::ExistingFile);
  matrix->add_option("--dataset", dataset_path, "Dataset CSV")->required();
  matrix->add_option("--out-dir", out_dir, "Directory for matrix.json and matrix.csv");
  matrix->add_option("--seed", seed, "Override the config seed");
  matrix->add_flag("--parallel", parallel, "Run cells concurrently");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint written by train")->required();
  eval->add_option("--dataset", dataset_path, "Dataset CSV")->required();
  eval->add_option("--config", config_path, "Config supplying the dataset column mapping")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      const auto config = load(config_path, seed);
      const auto summary = cmd_generate(config, out_path);
      for (std::size_t m = 0; m < kClassCount; ++m)
        std::cout << to_string(kAllModels[m]) << ": " << summary.rows_per_model[m] << " rows\n";
      std::cout << "total: " << summary.rows << " rows -> " << out_path << "\n";
    } else if (*train) {
      const auto config = load(config_path, seed);
      const auto mode = parse_mode(mode_text);
      const auto out = cmd_train(dataset_path, config, *mode, out_dir);
      std::cout << mode_text << " test accuracy: " << std::setprecision(6) << out.test_accuracy << "\n";
      print_confusion(out.confusion);
      std::cout << "metrics: " << out.metrics_path.string() << "\ncheckpoint: " << out.checkpoint_path.string()
                << "\n";
    } else if (*matrix) {
      const auto config = load(config_path, seed);
      const auto report = cmd_attack_matrix(dataset_path, config, out_dir, parallel);
      int failed = 0;
      for (const auto& c : report.cells) {
        std::cout << std::left << std::setw(7) << to_string(c.aggregator) << " malicious=" << c.n_malicious
                  << " fraction=" << std::setw(5) << c.fraction << " rep=" << c.replicate << "  ";
        if (c.ok) {
          std::cout << "accuracy=" << std::setprecision(4) << c.accuracy << "\n";
        } else {
          ++failed;
          std::cout << "FAILED: " << c.error << "\n";
        }
      }
      std::cout << report.cells.size() << " runs, " << failed << " failed -> " << out_dir << "\n";
      return failed == 0 ? kExitOk : kExitRuntime;
    } else if (*eval) {
      DatasetSchema schema;
      if (!config_path.empty()) schema = load_config(config_path).dataset_schema;
      const auto ev = cmd_eval(checkpoint_path, dataset_path, schema);
      std::cout << "accuracy: " << std::setprecision(6) << ev.accuracy << " (" << ev.total << " rows)\n";
      print_confusion(ev.confusion);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}
