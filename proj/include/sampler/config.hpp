#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "sampler/bench.hpp"

namespace sampler {

struct Config {
    Scenario scenario;
    std::optional<std::string> output_path;
};

// Parses and validates a configuration document. Unknown keys, wrong types
// and inconsistent settings raise ConfigError naming the offending key.
Config parse_config(const nlohmann::ordered_json& doc);
Config load_config(const std::filesystem::path& path);

// Configuration document equivalent to `s`; parse_config inverts it.
nlohmann::ordered_json scenario_to_json(const Scenario& s, const std::optional<std::string>& output_path = {});

}  // namespace sampler
