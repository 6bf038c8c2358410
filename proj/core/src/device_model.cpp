#include "fedprint/device_model.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "fedprint/errors.hpp"

namespace fedprint {

DeviceModel model_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kClassCount))
    throw InputError("class index out of range: " + std::to_string(index));
  return static_cast<DeviceModel>(index);
}

std::string_view to_string(DeviceModel m) {
  switch (m) {
    case DeviceModel::RPI1: return "RPI1";
    case DeviceModel::RPI2: return "RPI2";
    case DeviceModel::RPI3: return "RPI3";
    case DeviceModel::RPI4: return "RPI4";
  }
  return "?";
}

std::optional<DeviceModel> parse_model(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (DeviceModel m : kAllModels)
    if (upper == to_string(m)) return m;
  return std::nullopt;
}

}  // namespace fedprint
