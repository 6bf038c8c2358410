#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fedprint/fingerprint.hpp"

namespace fedprint {

// Canonical header written by write_dataset.
std::string dataset_header();

// Maps canonical column names (see kFeatureNames, plus "model" and
// "device_id") onto the names used by a foreign file, and extra label
// spellings onto device models. Unmapped columns are looked up by their
// canonical name. Column order in the file is free.
struct DatasetSchema {
  std::map<std::string, std::string> column_names;
  std::map<std::string, DeviceModel> label_aliases;
};

void write_dataset(std::span<const FeatureVector> rows, const std::filesystem::path& path);
std::string format_dataset(std::span<const FeatureVector> rows);

std::vector<FeatureVector> read_dataset(const std::filesystem::path& path,
                                        const DatasetSchema& schema = {});
std::vector<FeatureVector> parse_dataset(const std::string& text,
                                         const DatasetSchema& schema = {});

// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

// Writes to a sibling temp file and renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace fedprint
