#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "ncts/lmi.hpp"
#include "ncts/model.hpp"
#include "ncts/simulator.hpp"
#include "ncts/synthesis.hpp"

namespace ncts {

// A case file: model plus the scalars, fault mode and scenario it is run with.
struct Preset {
    std::string name;
    CascadeModel model;
    TheoremScalars scalars;
    FaultMode fault_mode = FaultMode::unknown;
    nlohmann::json scenario = nlohmann::json::object();

    FaultSpec fault_spec() const;
    Scenario build_scenario() const { return scenario_from_json(scenario, model); }
};

Preset preset_from_json(const nlohmann::json& j);
Preset load_preset(const std::filesystem::path& path);

// NCTS_DATA if set, else the data directory of the source tree.
std::filesystem::path data_dir();
// A file path is used as is; a bare name resolves to <data_dir>/presets/<name>.json.
std::filesystem::path resolve_preset(const std::string& name_or_path);

} // namespace ncts
