#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace fedprint {

// Raspberry Pi generations. The numeric value is the class index used by the
// classifier (RPI1 = 0 ... RPI4 = 3).
enum class DeviceModel : std::uint8_t { RPI1 = 0, RPI2 = 1, RPI3 = 2, RPI4 = 3 };

inline constexpr std::size_t kClassCount = 4;
inline constexpr std::size_t kFeatureCount = 13;

inline constexpr std::array<DeviceModel, kClassCount> kAllModels = {
    DeviceModel::RPI1, DeviceModel::RPI2, DeviceModel::RPI3, DeviceModel::RPI4};

constexpr int class_index(DeviceModel m) { return static_cast<int>(m); }

DeviceModel model_from_index(int index);

std::string_view to_string(DeviceModel m);

// Accepts "RPI3", "RPi3", "rpi3" (any case). Returns nullopt otherwise.
std::optional<DeviceModel> parse_model(std::string_view text);

}  // namespace fedprint
