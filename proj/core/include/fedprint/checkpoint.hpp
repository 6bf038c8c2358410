#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "fedprint/mlp.hpp"
#include "fedprint/normalization.hpp"

namespace fedprint {

inline constexpr int kCheckpointVersion = 1;

// Architecture plus the canonical flat parameter vector, and the min-max
// bounds the model was trained with.
struct Checkpoint {
  ModelWeights weights;
  std::optional<MinMaxBounds> bounds;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& text);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fedprint
