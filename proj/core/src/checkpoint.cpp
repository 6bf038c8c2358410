#include "fedprint/checkpoint.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <vector>

#include "fedprint/dataset_io.hpp"
#include "fedprint/errors.hpp"

namespace fedprint {

using nlohmann::json;

namespace {
constexpr const char* kFormat = "fedprint-checkpoint";
}

std::string serialize_checkpoint(const Checkpoint& cp) {
  const Vector flat = flatten(cp.weights);
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kCheckpointVersion;
  doc["layer_sizes"] = cp.weights.architecture().layer_sizes;
  // nlohmann emits the shortest round-tripping decimal for doubles.
  doc["parameters"] = std::vector<double>(flat.data(), flat.data() + flat.size());
  if (cp.bounds) doc["bounds"] = {{"min", cp.bounds->min}, {"max", cp.bounds->max}};
  return doc.dump() + "\n";
}

Checkpoint deserialize_checkpoint(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.value("format", "") != kFormat) throw ParseError("not a fedprint checkpoint");
    if (doc.value("version", 0) != kCheckpointVersion)
      throw ParseError("unsupported checkpoint version " + doc.at("version").dump());
    MlpArchitecture arch;
    arch.layer_sizes = doc.at("layer_sizes").get<std::vector<int>>();
    arch.validate();
    const auto params = doc.at("parameters").get<std::vector<double>>();
    Checkpoint cp;
    cp.weights = unflatten(arch, Eigen::Map<const Vector>(params.data(), static_cast<Eigen::Index>(params.size())));
    if (doc.contains("bounds")) {
      MinMaxBounds b;
      b.min = doc["bounds"].at("min").get<std::array<double, kFeatureCount>>();
      b.max = doc["bounds"].at("max").get<std::array<double, kFeatureCount>>();
      cp.bounds = b;
    }
    return cp;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  } catch (const InputError& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(cp));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace fedprint
