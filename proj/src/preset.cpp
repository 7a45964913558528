#include "ncts/preset.hpp"

#include <cstdlib>
#include <fstream>

namespace ncts {

using nlohmann::json;

FaultSpec Preset::fault_spec() const {
    if (fault_mode == FaultMode::known) {
        return FaultSpec::known(model.fault.realized_or_mean());
    }
    return FaultSpec::unknown();
}

Preset preset_from_json(const json& j) {
    if (!j.is_object() || !j.contains("model")) {
        throw ModelFormatError("preset: expected an object with a 'model' section");
    }
    for (const auto& item : j.items()) {
        const auto& k = item.key();
        if (k != "name" && k != "model" && k != "scalars" && k != "synthesis" && k != "scenario") {
            throw ModelFormatError("preset: unknown key '" + k + "'");
        }
    }
    Preset p;
    p.name = j.value("name", std::string());
    p.model = model_from_json(j.at("model"));
    if (j.contains("scalars")) {
        for (const auto& item : j.at("scalars").items()) {
            if (!is_theorem_scalar(item.key())) {
                throw ModelFormatError("preset.scalars: unknown scalar '" + item.key() + "'");
            }
            if (!item.value().is_number()) {
                throw ModelFormatError("preset.scalars." + item.key() + ": expected a number");
            }
            apply_override(p.scalars, item.key(), item.value().get<double>());
        }
    }
    if (j.contains("synthesis")) {
        const json& s = j.at("synthesis");
        for (const auto& item : s.items()) {
            if (item.key() != "fault_mode") {
                throw ModelFormatError("preset.synthesis: unknown key '" + item.key() + "'");
            }
        }
        const std::string mode = s.value("fault_mode", std::string("unknown"));
        if (mode == "known") {
            p.fault_mode = FaultMode::known;
        } else if (mode == "unknown") {
            p.fault_mode = FaultMode::unknown;
        } else {
            throw ModelFormatError("preset.synthesis.fault_mode: expected 'known' or 'unknown'");
        }
    }
    if (j.contains("scenario")) {
        p.scenario = j.at("scenario");
        scenario_from_json(p.scenario, p.model); // reject malformed scenarios early
    }
    return p;
}

Preset load_preset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open preset file '" + path.string() + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ModelFormatError(path.string() + ": " + e.what());
    }
    Preset p = preset_from_json(j);
    if (p.name.empty()) {
        p.name = path.stem().string();
    }
    return p;
}

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("NCTS_DATA"); env != nullptr && *env != '\0') {
        return env;
    }
#ifdef NCTS_DATA_DIR
    return NCTS_DATA_DIR;
#else
    return "data";
#endif
}

std::filesystem::path resolve_preset(const std::string& name) {
    const std::filesystem::path p(name);
    if (p.has_extension() || p.has_parent_path()) {
        return p;
    }
    return data_dir() / "presets" / (name + ".json");
}

} // namespace ncts
