#pragma once

#include <map>
#include <string>

#include "ncts/preset.hpp"
#include "ncts/synthesis.hpp"

namespace ncts::test {

inline const Preset& preset(const std::string& name) {
    static std::map<std::string, Preset> cache;
    auto it = cache.find(name);
    if (it == cache.end()) {
        it = cache.emplace(name, load_preset(resolve_preset(name))).first;
    }
    return it->second;
}

// Synthesized once per preset and shared by every test in the binary.
inline const SynthesisResult& synthesized(const std::string& name) {
    static std::map<std::string, SynthesisResult> cache;
    auto it = cache.find(name);
    if (it == cache.end()) {
        const Preset& p = preset(name);
        it = cache.emplace(name, synthesize(p.model, p.scalars, p.fault_spec())).first;
    }
    return it->second;
}

} // namespace ncts::test
