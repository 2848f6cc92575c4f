#pragma once

#include <json.hpp>

#include "copycat/model.hpp"

namespace copycat {

// ADL hooks so nlohmann::json converts these types directly.
void to_json(nlohmann::json& j, const InputShape& s);
void from_json(const nlohmann::json& j, InputShape& s);
void to_json(nlohmann::json& j, const LayerDesc& d);
void from_json(const nlohmann::json& j, LayerDesc& d);
void to_json(nlohmann::json& j, const ModelSpec& s);
void from_json(const nlohmann::json& j, ModelSpec& s);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace copycat
