#include "fedprint/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "fedprint/checkpoint.hpp"
#include "fedprint/errors.hpp"
#include "fedprint/seeding.hpp"

namespace fedprint {

using nlohmann::json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const InputError*>(&e)) return kExitData;
  return kExitRuntime;
}

std::optional<TrainMode> parse_mode(std::string_view text) {
  if (text == "centralized") return TrainMode::Centralized;
  if (text == "federated") return TrainMode::Federated;
  return std::nullopt;
}

GenerateSummary cmd_generate(const ScenarioConfig& config, const std::filesystem::path& out_path) {
  config.generator.validate();
  const auto rows = build_corpus(config.generator);
  write_dataset(rows, out_path);
  GenerateSummary s;
  s.rows = rows.size();
  for (const auto& r : rows) ++s.rows_per_model[static_cast<std::size_t>(class_index(r.model_label))];
  return s;
}

std::vector<FeatureVector> server_validation_rows(const ScenarioConfig& config) {
  const int per_model = std::max(1, config.server_validation_rows / static_cast<int>(kClassCount));
  // Device ids far above any corpus device.
  constexpr std::int64_t kServerDeviceBase = std::int64_t{1} << 40;
  return sample_rows(config.generator, per_model, kServerDeviceBase,
                     derive_seed(config.seed, {seed_tag::kServerValidation}));
}

FederatedRun run_federated_scenario(std::span<const FeatureVector> corpus, const ScenarioConfig& config,
                                    const AggregatorSpec& aggregator, const AttackConfig& attack) {
  FederatedRun run;
  run.aggregator = aggregator;
  run.attack = attack;
  run.orgs = partition_scenario(corpus, config.partition);

  AttackConfig effective = attack;
  effective.seed = derive_seed(config.seed, {seed_tag::kAttack, attack.seed});
  auto outcome = apply_attack(run.orgs, effective);
  run.poisoned_rows = outcome.poisoned_rows;

  run.bounds = normalization_handshake(outcome.orgs);
  const auto prepared = prepare_orgs(outcome.orgs, run.bounds);
  const auto test_rows = global_test_rows(outcome.orgs);
  const Dataset test = to_dataset(test_rows, run.bounds);

  Dataset server_validation;
  if (aggregator.kind == AggregatorKind::Zeno)
    server_validation = to_dataset(server_validation_rows(config), run.bounds);
  const Aggregator agg(aggregator, std::move(server_validation));

  run.result = run_federated(prepared, test, config.federated_options(), agg);
  if (!test.empty()) run.final_test = evaluate(run.result.weights, test);
  return run;
}

FederatedRun run_federated_scenario(std::span<const FeatureVector> corpus, const ScenarioConfig& config) {
  return run_federated_scenario(corpus, config, config.aggregation, config.attack);
}

namespace {

json confusion_json(const ConfusionMatrix& c) {
  json rows = json::array();
  for (const auto& r : c) rows.push_back(std::vector<std::int64_t>(r.begin(), r.end()));
  return rows;
}

json header(const ScenarioConfig& config, const char* kind) {
  return {{"schema_version", kMetricsSchemaVersion},
          {"kind", kind},
          {"config_hash", config_hash(config)},
          {"seed", config.seed},
          {"config", to_json(config)}};
}

json rounds_json(std::span<const RoundMetrics> rounds) {
  json out = json::array();
  for (const auto& r : rounds) {
    json orgs = json::array();
    for (const auto& o : r.org_validation) orgs.push_back({{"org", o.org_id}, {"validation_accuracy", o.accuracy}});
    out.push_back({{"round", r.round},
                   {"test_accuracy", r.test_accuracy},
                   {"org_validation", orgs},
                   {"participants", r.participants},
                   {"selected_orgs", r.selected_orgs},
                   {"confusion", confusion_json(r.confusion)}});
  }
  return out;
}

std::filesystem::path ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::string fraction_text(double f) { return format_double(f); }

}  // namespace

json federated_metrics(const ScenarioConfig& config, const FederatedRun& run) {
  json doc = header(config, "federated");
  doc["aggregator"] = {{"kind", std::string(to_string(run.aggregator.kind))},
                       {"krum_f", run.aggregator.krum_f},
                       {"zeno_rho", run.aggregator.zeno_rho},
                       {"zeno_b", run.aggregator.zeno_b},
                       {"zeno_gamma", run.aggregator.zeno_gamma}};
  json poisoned = json::array();
  for (const auto& [org, n] : run.poisoned_rows) poisoned.push_back({{"org", org}, {"rows", n}});
  doc["attack"] = {{"malicious_orgs", std::vector<int>(run.attack.malicious_org_ids.begin(),
                                                        run.attack.malicious_org_ids.end())},
                   {"poison_fraction", run.attack.poison_fraction},
                   {"poisoned_rows", poisoned}};
  json orgs = json::array();
  for (const auto& o : run.orgs) {
    std::vector<std::string> models;
    for (auto m : o.models_present) models.emplace_back(to_string(m));
    orgs.push_back({{"org", o.org_id},
                    {"models", models},
                    {"train_rows", o.train.size()},
                    {"validation_rows", o.validation.size()},
                    {"test_rows", o.test.size()}});
  }
  doc["organizations"] = orgs;
  doc["rounds"] = rounds_json(run.result.rounds);
  doc["final"] = {{"test_accuracy", run.final_test.accuracy},
                  {"test_rows", run.final_test.total},
                  {"confusion", confusion_json(run.final_test.confusion)}};
  return doc;
}

json centralized_metrics(const ScenarioConfig& config, const CentralizedResult& run) {
  json doc = header(config, "centralized");
  json epochs = json::array();
  for (std::size_t e = 0; e < run.validation_accuracy.size(); ++e)
    epochs.push_back({{"epoch", e + 1},
                      {"train_loss", run.train_loss[e]},
                      {"validation_accuracy", run.validation_accuracy[e]}});
  doc["epochs"] = epochs;
  doc["best_epoch"] = run.best_epoch;
  doc["epochs_run"] = run.epochs_run;
  doc["rows"] = {{"train", run.train_rows}, {"validation", run.validation_rows}, {"test", run.test_rows}};
  doc["final"] = {{"test_accuracy", run.test.accuracy},
                  {"test_rows", run.test.total},
                  {"confusion", confusion_json(run.test.confusion)}};
  return doc;
}

std::string confusion_csv(const ConfusionMatrix& c) {
  std::ostringstream out;
  out << "true\\predicted";
  for (auto m : kAllModels) out << ',' << to_string(m);
  out << '\n';
  for (std::size_t t = 0; t < kClassCount; ++t) {
    out << to_string(kAllModels[t]);
    for (auto v : c[t]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

std::string curves_csv(std::span<const RoundMetrics> rounds) {
  std::string out = "round,org,validation_accuracy\n";
  for (const auto& r : rounds)
    for (const auto& o : r.org_validation)
      out += std::to_string(r.round) + "," + std::to_string(o.org_id) + "," + format_double(o.accuracy) + "\n";
  return out;
}

TrainOutputs cmd_train(const std::filesystem::path& dataset_path, const ScenarioConfig& config,
                       TrainMode mode, const std::filesystem::path& out_dir) {
  config.validate();
  const auto corpus = read_dataset(dataset_path, config.dataset_schema);
  if (corpus.empty()) throw InputError("dataset " + dataset_path.string() + " has no rows");
  ensure_dir(out_dir);

  TrainOutputs out;
  out.mode = mode;
  Checkpoint cp;
  if (mode == TrainMode::Centralized) {
    const auto res = run_centralized(corpus, config.centralized_options());
    out.test_accuracy = res.test.accuracy;
    out.confusion = res.test.confusion;
    out.metrics = centralized_metrics(config, res);
    cp = {res.weights, res.bounds};
  } else {
    const auto run = run_federated_scenario(corpus, config);
    out.test_accuracy = run.final_test.accuracy;
    out.confusion = run.final_test.confusion;
    out.metrics = federated_metrics(config, run);
    cp = {run.result.weights, run.bounds};
    out.curves_path = out_dir / "curves.csv";
    write_file_atomic(out.curves_path, curves_csv(run.result.rounds));
  }
  out.metrics_path = out_dir / "metrics.json";
  out.confusion_path = out_dir / "confusion.csv";
  out.checkpoint_path = out_dir / "checkpoint.json";
  write_file_atomic(out.metrics_path, out.metrics.dump(2) + "\n");
  write_file_atomic(out.confusion_path, confusion_csv(out.confusion));
  save_checkpoint(cp, out.checkpoint_path);
  return out;
}

Evaluation cmd_eval(const std::filesystem::path& checkpoint_path, const std::filesystem::path& dataset_path,
                    const DatasetSchema& schema) {
  const auto cp = load_checkpoint(checkpoint_path);
  const auto rows = read_dataset(dataset_path, schema);
  if (rows.empty()) throw InputError("dataset " + dataset_path.string() + " has no rows");
  MinMaxBounds bounds;
  if (cp.bounds) {
    bounds = *cp.bounds;
  } else {
    // Identity scaling: min 0, max 1.
    bounds.min.fill(0.0);
    bounds.max.fill(1.0);
  }
  return evaluate(cp.weights, to_dataset(rows, bounds));
}

std::uint64_t replicate_seed(std::uint64_t seed, int replicate) {
  return replicate == 0 ? seed : derive_seed(seed, {0x5EED, static_cast<std::uint64_t>(replicate)});
}

std::vector<MatrixCell> plan_matrix(const ScenarioConfig& config) {
  config.matrix.validate(config.partition.org_count);
  std::vector<MatrixCell> cells;
  for (auto kind : config.matrix.aggregators)
    for (int rep = 0; rep < config.matrix.replications; ++rep) {
      MatrixCell clean;
      clean.aggregator = kind;
      clean.replicate = rep;
      clean.seed = replicate_seed(config.seed, rep);
      cells.push_back(clean);
      for (int count : config.matrix.malicious_counts)
        for (double f : config.matrix.fractions) {
          MatrixCell cell = clean;
          cell.n_malicious = count;
          cell.fraction = f;
          cell.malicious_orgs.assign(config.matrix.malicious_order.begin(),
                                     config.matrix.malicious_order.begin() + count);
          cells.push_back(cell);
        }
    }
  return cells;
}

namespace {

void run_cell(std::span<const FeatureVector> corpus, const ScenarioConfig& base, MatrixCell& cell) {
  try {
    ScenarioConfig config = base;
    config.seed = cell.seed;
    AggregatorSpec spec = base.aggregation;
    spec.kind = cell.aggregator;
    AttackConfig attack;
    attack.seed = base.attack.seed;
    attack.poison_fraction = cell.fraction;
    attack.malicious_org_ids = {cell.malicious_orgs.begin(), cell.malicious_orgs.end()};
    config.aggregation = spec;
    config.attack = attack;

    const auto run = run_federated_scenario(corpus, config, spec, attack);
    cell.accuracy = run.final_test.accuracy;
    cell.confusion = run.final_test.confusion;
    cell.poisoned_rows = run.poisoned_rows;
    for (const auto& r : run.result.rounds) {
      cell.test_curve.push_back(r.test_accuracy);
      cell.selected_orgs.push_back(r.selected_orgs);
    }
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
}

}  // namespace

MatrixReport run_attack_matrix(std::span<const FeatureVector> corpus, const ScenarioConfig& config,
                               bool parallel) {
  config.validate();
  MatrixReport report;
  report.config_hash = config_hash(config);
  report.cells = plan_matrix(config);

  if (!parallel) {
    for (auto& cell : report.cells) run_cell(corpus, config, cell);
    return report;
  }
  const unsigned workers =
      std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), static_cast<unsigned>(report.cells.size())));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < report.cells.size(); i = next++) run_cell(corpus, config, report.cells[i]);
    });
  for (auto& t : pool) t.join();
  return report;
}

json matrix_json(const ScenarioConfig& config, const MatrixReport& report) {
  json doc = header(config, "attack-matrix");
  json cells = json::array();
  for (const auto& c : report.cells) {
    json poisoned = json::array();
    for (const auto& [org, n] : c.poisoned_rows) poisoned.push_back({{"org", org}, {"rows", n}});
    json cell = {{"aggregator", std::string(to_string(c.aggregator))},
                 {"n_malicious", c.n_malicious},
                 {"fraction", c.fraction},
                 {"malicious_orgs", c.malicious_orgs},
                 {"replicate", c.replicate},
                 {"seed", c.seed},
                 {"config_hash", report.config_hash},
                 {"status", c.ok ? "ok" : "error"}};
    if (c.ok) {
      cell["accuracy"] = c.accuracy;
      cell["confusion"] = confusion_json(c.confusion);
      cell["test_curve"] = c.test_curve;
      cell["selected_orgs"] = c.selected_orgs;
      cell["poisoned_rows"] = poisoned;
    } else {
      cell["error"] = c.error;
    }
    cells.push_back(cell);
  }
  doc["cells"] = cells;

  // Mean and population std of accuracy across replicates.
  json summary = json::array();
  for (const auto& c : report.cells) {
    if (c.replicate != 0) continue;
    std::vector<double> acc;
    for (const auto& o : report.cells)
      if (o.ok && o.aggregator == c.aggregator && o.n_malicious == c.n_malicious && o.fraction == c.fraction)
        acc.push_back(o.accuracy);
    json entry = {{"aggregator", std::string(to_string(c.aggregator))},
                  {"n_malicious", c.n_malicious},
                  {"fraction", c.fraction},
                  {"runs", acc.size()}};
    if (!acc.empty()) {
      double mean = 0;
      for (double a : acc) mean += a;
      mean /= static_cast<double>(acc.size());
      double var = 0;
      for (double a : acc) var += (a - mean) * (a - mean);
      entry["mean_accuracy"] = mean;
      entry["std_accuracy"] = std::sqrt(var / static_cast<double>(acc.size()));
    }
    summary.push_back(entry);
  }
  doc["summary"] = summary;
  return doc;
}

std::string matrix_csv(const MatrixReport& report) {
  std::string out = "aggregator,n_malicious,fraction,replicate,seed,status,accuracy,config_hash\n";
  for (const auto& c : report.cells) {
    out += std::string(to_string(c.aggregator)) + "," + std::to_string(c.n_malicious) + "," +
           fraction_text(c.fraction) + "," + std::to_string(c.replicate) + "," + std::to_string(c.seed) + "," +
           (c.ok ? "ok" : "error") + "," + (c.ok ? format_double(c.accuracy) : std::string()) + "," +
           report.config_hash + "\n";
  }
  return out;
}

MatrixReport cmd_attack_matrix(const std::filesystem::path& dataset_path, const ScenarioConfig& config,
                               const std::filesystem::path& out_dir, bool parallel) {
  config.validate();
  const auto corpus = read_dataset(dataset_path, config.dataset_schema);
  if (corpus.empty()) throw InputError("dataset " + dataset_path.string() + " has no rows");
  ensure_dir(out_dir);
  auto report = run_attack_matrix(corpus, config, parallel);
  write_file_atomic(out_dir / "matrix.json", matrix_json(config, report).dump(2) + "\n");
  write_file_atomic(out_dir / "matrix.csv", matrix_csv(report));
  return report;
}

}  // namespace fedprint
