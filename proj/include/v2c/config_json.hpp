#pragma once

#include "json.hpp"
#include "v2c/model.hpp"

namespace v2c {

nlohmann::json to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);

}  // namespace v2c
