#pragma once

// JSON mappings for configuration structs. Readers reject unknown keys.

#include <initializer_list>
#include <string>

#include "json.hpp"
#include "skgait/fusion.hpp"
#include "skgait/loss.hpp"
#include "skgait/model.hpp"

namespace skgait {

using Json = nlohmann::json;

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);

Json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j);

Json to_json(const FusionLossConfig& c);
FusionLossConfig loss_config_from_json(const Json& j);

Json to_json(const FusionPolicy& p);
FusionPolicy fusion_policy_from_json(const Json& j);

}  // namespace skgait
