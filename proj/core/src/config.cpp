#include "fedprint/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <set>

#include "fedprint/errors.hpp"

namespace fedprint {

using nlohmann::json;

namespace {

void check_keys(const json& section, const std::string& name,
                std::initializer_list<const char*> allowed) {
  if (!section.is_object()) throw ConfigError("section '" + name + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                [&key](const char* a) { return key == a; });
    if (!ok) throw ConfigError("unknown key '" + key + "' in section '" + name + "'");
  }
}

template <typename T>
void read(const json& section, const char* key, T& out, const std::string& where) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

DeviceModel model_named(const std::string& name, const std::string& where) {
  if (auto m = parse_model(name)) return *m;
  throw ConfigError(where + ": unknown device model '" + name + "'");
}

}  // namespace

void MatrixSpec::validate(int org_count) const {
  if (aggregators.empty()) throw ConfigError("matrix needs at least one aggregator");
  if (replications < 1) throw ConfigError("matrix replications must be at least 1");
  for (double f : fractions)
    if (!(f >= 0 && f <= 1)) throw ConfigError("matrix fractions must lie in [0, 1]");
  std::set<int> distinct(malicious_order.begin(), malicious_order.end());
  if (distinct.size() != malicious_order.size())
    throw ConfigError("matrix malicious_order has duplicates");
  for (int id : malicious_order)
    if (id < 0 || id >= org_count)
      throw ConfigError("matrix malicious_order names unknown org " + std::to_string(id));
  for (int c : malicious_counts)
    if (c < 1 || static_cast<std::size_t>(c) > malicious_order.size())
      throw ConfigError("matrix malicious count " + std::to_string(c) +
                        " exceeds the malicious_order list");
}

void ScenarioConfig::validate() const {
  generator.validate();
  architecture.validate();
  if (architecture.input_size() != kFeatureCount)
    throw ConfigError("first layer must have " + std::to_string(kFeatureCount) + " inputs");
  if (architecture.output_size() != kClassCount)
    throw ConfigError("last layer must have " + std::to_string(kClassCount) + " outputs");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(adam.learning_rate >= 0)) throw ConfigError("learning_rate must be non-negative");
  centralized_options().validate();
  federated_options().validate();
  partition.validate();
  if (partition.org_count < 2) throw ConfigError("a federated scenario needs at least 2 organizations");
  for (DeviceModel m : kAllModels) {
    const bool held = std::any_of(partition.models_per_org.begin(), partition.models_per_org.end(),
                                  [m](const auto& s) { return s.count(m) > 0; });
    if (!held) throw ConfigError("device model " + std::string(to_string(m)) + " is held by no organization");
  }
  aggregation.validate();
  const bool uses_krum = aggregation.kind == AggregatorKind::Krum ||
                         std::count(matrix.aggregators.begin(), matrix.aggregators.end(), AggregatorKind::Krum);
  if (uses_krum && aggregation.krum_f > partition.org_count - 3)
    throw ConfigError("krum_f must be at most org_count - 3");
  if (aggregation.zeno_b >= partition.org_count) throw ConfigError("zeno_b must be below org_count");
  if (server_validation_rows < static_cast<int>(kClassCount))
    throw ConfigError("server_validation_rows must cover every class");
  attack.validate();
  for (int id : attack.malicious_org_ids)
    if (id < 0 || id >= partition.org_count)
      throw ConfigError("attack names unknown org " + std::to_string(id));
  matrix.validate(partition.org_count);
}

FederatedOptions ScenarioConfig::federated_options() const {
  FederatedOptions o;
  o.architecture = architecture;
  o.adam = adam;
  o.rounds = rounds;
  o.local_epochs = local_epochs;
  o.client_fraction = client_fraction;
  o.batch_size = batch_size;
  o.seed = seed;
  o.parallel_clients = parallel_clients;
  return o;
}

CentralizedOptions ScenarioConfig::centralized_options() const {
  CentralizedOptions o;
  o.architecture = architecture;
  o.adam = adam;
  o.max_epochs = max_epochs;
  o.patience = patience;
  o.batch_size = batch_size;
  o.split = centralized_split;
  o.seed = seed;
  return o;
}

ScenarioConfig config_from_json(const json& doc) {
  ScenarioConfig c;
  check_keys(doc, "<root>",
             {"seed", "generator", "model", "centralized", "federated", "aggregation", "attack", "matrix",
              "dataset", "description"});
  read(doc, "seed", c.seed, "seed");
  c.generator.seed = c.seed;

  if (doc.contains("generator")) {
    const auto& g = doc["generator"];
    check_keys(g, "generator", {"seed", "devices_per_model", "groups_per_device", "group_size", "profiles"});
    read(g, "seed", c.generator.seed, "generator");
    if (g.contains("devices_per_model")) {
      const auto& d = g["devices_per_model"];
      if (d.is_number_integer()) {
        c.generator.device_counts.fill(d.get<int>());
      } else if (d.is_object()) {
        for (const auto& [name, count] : d.items())
          c.generator.device_counts[static_cast<std::size_t>(
              class_index(model_named(name, "generator.devices_per_model")))] = count.get<int>();
      } else {
        throw ConfigError("generator.devices_per_model must be an integer or a per-model object");
      }
    }
    read(g, "groups_per_device", c.generator.groups_per_device, "generator");
    read(g, "group_size", c.generator.group_size, "generator");
    if (g.contains("profiles")) {
      for (const auto& [name, p] : g["profiles"].items()) {
        auto& prof = c.generator.profiles[static_cast<std::size_t>(
            class_index(model_named(name, "generator.profiles")))];
        const std::string where = "generator.profiles." + name;
        check_keys(p, where, {"base_time", "dispersion", "spike_probability", "spike_scale", "device_variation"});
        read(p, "base_time", prof.base_time, where);
        read(p, "dispersion", prof.dispersion, where);
        read(p, "spike_probability", prof.spike_probability, where);
        read(p, "spike_scale", prof.spike_scale, where);
        read(p, "device_variation", prof.device_variation, where);
      }
    }
  }

  if (doc.contains("model")) {
    const auto& m = doc["model"];
    check_keys(m, "model", {"layer_sizes", "learning_rate", "beta1", "beta2", "epsilon", "batch_size"});
    read(m, "layer_sizes", c.architecture.layer_sizes, "model");
    read(m, "learning_rate", c.adam.learning_rate, "model");
    read(m, "beta1", c.adam.beta1, "model");
    read(m, "beta2", c.adam.beta2, "model");
    read(m, "epsilon", c.adam.epsilon, "model");
    read(m, "batch_size", c.batch_size, "model");
  }

  if (doc.contains("centralized")) {
    const auto& s = doc["centralized"];
    check_keys(s, "centralized", {"max_epochs", "patience", "train_fraction", "validation_fraction"});
    read(s, "max_epochs", c.max_epochs, "centralized");
    read(s, "patience", c.patience, "centralized");
    read(s, "train_fraction", c.centralized_split.train, "centralized");
    read(s, "validation_fraction", c.centralized_split.validation, "centralized");
  }

  if (doc.contains("federated")) {
    const auto& f = doc["federated"];
    check_keys(f, "federated",
               {"org_count", "distribution", "rounds", "local_epochs", "client_fraction", "train_fraction",
                "validation_fraction", "parallel_clients"});
    read(f, "org_count", c.partition.org_count, "federated");
    if (f.contains("distribution")) {
      const auto& d = f["distribution"];
      if (!d.is_array()) throw ConfigError("federated.distribution must be an array, one entry per org");
      c.partition.models_per_org.clear();
      // Each entry is a list of models (weight 1) or a {model: weight} object.
      for (const auto& org : d) {
        std::map<DeviceModel, int> models;
        if (org.is_object()) {
          for (const auto& [name, weight] : org.items())
            models[model_named(name, "federated.distribution")] = weight.get<int>();
        } else {
          for (const auto& name : org) models[model_named(name.get<std::string>(), "federated.distribution")] = 1;
        }
        c.partition.models_per_org.push_back(std::move(models));
      }
    }
    read(f, "rounds", c.rounds, "federated");
    read(f, "local_epochs", c.local_epochs, "federated");
    read(f, "client_fraction", c.client_fraction, "federated");
    read(f, "train_fraction", c.partition.split.train, "federated");
    read(f, "validation_fraction", c.partition.split.validation, "federated");
    read(f, "parallel_clients", c.parallel_clients, "federated");
  }

  if (doc.contains("aggregation")) {
    const auto& a = doc["aggregation"];
    check_keys(a, "aggregation", {"kind", "krum_f", "zeno_rho", "zeno_b", "zeno_gamma", "server_validation_rows"});
    if (a.contains("kind")) {
      const auto name = a["kind"].get<std::string>();
      auto kind = parse_aggregator(name);
      if (!kind) throw ConfigError("unknown aggregator '" + name + "'");
      c.aggregation.kind = *kind;
    }
    read(a, "krum_f", c.aggregation.krum_f, "aggregation");
    read(a, "zeno_rho", c.aggregation.zeno_rho, "aggregation");
    read(a, "zeno_b", c.aggregation.zeno_b, "aggregation");
    c.aggregation.zeno_gamma = c.adam.learning_rate;
    read(a, "zeno_gamma", c.aggregation.zeno_gamma, "aggregation");
    read(a, "server_validation_rows", c.server_validation_rows, "aggregation");
  } else {
    c.aggregation.zeno_gamma = c.adam.learning_rate;
  }

  if (doc.contains("attack")) {
    const auto& a = doc["attack"];
    check_keys(a, "attack", {"malicious_orgs", "poison_fraction", "seed"});
    std::vector<int> ids;
    read(a, "malicious_orgs", ids, "attack");
    c.attack.malicious_org_ids = {ids.begin(), ids.end()};
    read(a, "poison_fraction", c.attack.poison_fraction, "attack");
    read(a, "seed", c.attack.seed, "attack");
  }

  if (doc.contains("matrix")) {
    const auto& m = doc["matrix"];
    check_keys(m, "matrix", {"aggregators", "malicious_counts", "malicious_order", "fractions", "replications"});
    if (m.contains("aggregators")) {
      c.matrix.aggregators.clear();
      for (const auto& name : m["aggregators"]) {
        auto kind = parse_aggregator(name.get<std::string>());
        if (!kind) throw ConfigError("unknown aggregator '" + name.get<std::string>() + "' in matrix");
        c.matrix.aggregators.push_back(*kind);
      }
    }
    read(m, "malicious_counts", c.matrix.malicious_counts, "matrix");
    read(m, "malicious_order", c.matrix.malicious_order, "matrix");
    read(m, "fractions", c.matrix.fractions, "matrix");
    read(m, "replications", c.matrix.replications, "matrix");
  }

  if (doc.contains("dataset")) {
    const auto& d = doc["dataset"];
    check_keys(d, "dataset", {"columns", "labels"});
    read(d, "columns", c.dataset_schema.column_names, "dataset");
    if (d.contains("labels"))
      for (const auto& [alias, name] : d["labels"].items())
        c.dataset_schema.label_aliases[alias] = model_named(name.get<std::string>(), "dataset.labels");
  }
  c.validate();
  return c;
}

json to_json(const ScenarioConfig& c) {
  json doc;
  doc["seed"] = c.seed;

  json profiles = json::object();
  json devices = json::object();
  for (std::size_t m = 0; m < kClassCount; ++m) {
    const auto& p = c.generator.profiles[m];
    const std::string name(to_string(kAllModels[m]));
    profiles[name] = {{"base_time", p.base_time},
                      {"dispersion", p.dispersion},
                      {"spike_probability", p.spike_probability},
                      {"spike_scale", p.spike_scale},
                      {"device_variation", p.device_variation}};
    devices[name] = c.generator.device_counts[m];
  }
  doc["generator"] = {{"seed", c.generator.seed},
                      {"devices_per_model", devices},
                      {"groups_per_device", c.generator.groups_per_device},
                      {"group_size", c.generator.group_size},
                      {"profiles", profiles}};

  doc["model"] = {{"layer_sizes", c.architecture.layer_sizes},
                  {"learning_rate", c.adam.learning_rate},
                  {"beta1", c.adam.beta1},
                  {"beta2", c.adam.beta2},
                  {"epsilon", c.adam.epsilon},
                  {"batch_size", c.batch_size}};
  doc["centralized"] = {{"max_epochs", c.max_epochs},
                        {"patience", c.patience},
                        {"train_fraction", c.centralized_split.train},
                        {"validation_fraction", c.centralized_split.validation}};

  json dist = json::array();
  for (const auto& org : c.partition.models_per_org) {
    json models = json::object();
    for (const auto& [m, weight] : org) models[std::string(to_string(m))] = weight;
    dist.push_back(models);
  }
  doc["federated"] = {{"org_count", c.partition.org_count},
                      {"distribution", dist},
                      {"rounds", c.rounds},
                      {"local_epochs", c.local_epochs},
                      {"client_fraction", c.client_fraction},
                      {"train_fraction", c.partition.split.train},
                      {"validation_fraction", c.partition.split.validation},
                      {"parallel_clients", c.parallel_clients}};

  doc["aggregation"] = {{"kind", std::string(to_string(c.aggregation.kind))},
                        {"krum_f", c.aggregation.krum_f},
                        {"zeno_rho", c.aggregation.zeno_rho},
                        {"zeno_b", c.aggregation.zeno_b},
                        {"zeno_gamma", c.aggregation.zeno_gamma},
                        {"server_validation_rows", c.server_validation_rows}};

  doc["attack"] = {{"malicious_orgs", std::vector<int>(c.attack.malicious_org_ids.begin(),
                                                        c.attack.malicious_org_ids.end())},
                   {"poison_fraction", c.attack.poison_fraction},
                   {"seed", c.attack.seed}};

  json aggs = json::array();
  for (auto k : c.matrix.aggregators) aggs.push_back(std::string(to_string(k)));
  doc["matrix"] = {{"aggregators", aggs},
                   {"malicious_counts", c.matrix.malicious_counts},
                   {"malicious_order", c.matrix.malicious_order},
                   {"fractions", c.matrix.fractions},
                   {"replications", c.matrix.replications}};

  json labels = json::object();
  for (const auto& [alias, m] : c.dataset_schema.label_aliases) labels[alias] = std::string(to_string(m));
  doc["dataset"] = {{"columns", c.dataset_schema.column_names}, {"labels", labels}};
  return doc;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    return config_from_json(doc);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

std::string config_hash(const ScenarioConfig& config) {
  const std::string text = to_json(config).dump();
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  std::string hex;
  hex.reserve(len * 2);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace fedprint
