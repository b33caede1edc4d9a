#pragma once

#include "gridreg/simulation.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace gridreg {

/// Malformed or inconsistent scenario document. The message names the
/// offending key path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
  std::string description;
  std::vector<std::string> node_names;
  Scenario scenario;
};

/// Parses a scenario document. Node indices in the document are one-based.
/// Unknown keys are rejected. Throws ConfigError.
ScenarioConfig parse_scenario(const nlohmann::json& doc);
ScenarioConfig load_scenario(const std::string& path);

}  // namespace gridreg
