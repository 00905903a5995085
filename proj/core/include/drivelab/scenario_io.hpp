#pragma once

#include <string>
#include <vector>

#include "drivelab/sim.hpp"

namespace drivelab {

inline constexpr const char* kScenarioSchema = "scenario-v1";

// JSON document {"schema": "scenario-v1", "scenarios": [...]}. Doubles are
// written in shortest round-trip form, so dump -> load is bit-exact.
std::string scenarios_to_json(const std::vector<Scenario>& scenarios);
std::vector<Scenario> scenarios_from_json(const std::string& text);

void save_scenarios(const std::string& path, const std::vector<Scenario>& scenarios);
std::vector<Scenario> load_scenarios(const std::string& path);

}  // namespace drivelab
