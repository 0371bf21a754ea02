#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "niso/trainer.hpp"

namespace niso {

/// Parses a training configuration. Unknown keys, wrong types and invalid
/// values raise ConfigError with the dotted field path.
TrainConfig parse_config(std::string_view json_text);
TrainConfig load_config(const std::filesystem::path& path);

/// Canonical JSON form; parse_config(config_to_json(c)) reproduces c.
std::string config_to_json(const TrainConfig& config, int indent = 2);

/// JSON Schema document describing the accepted configuration.
std::string config_schema();

std::string to_string(Regime r);

}  // namespace niso
