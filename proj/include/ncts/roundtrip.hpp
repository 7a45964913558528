#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncts/lmi.hpp"

namespace ncts {

// x*[[1]] - [[1]] >= 0 in one scalar.
LmiSystem toy_system();

// Smallest eigenvalue of every block of sum x_i F_i - F_0.
std::vector<double> block_min_eigs(const SdpaProblem& p, const Vec& x);

// The same quantities computed from the assembled system instead of the file.
std::vector<double> system_block_min_eigs(const LmiSystem& sys, const SdpaOptions& opts, const Vec& x);

struct FixtureCheck {
    std::string name;
    bool ok = false;
    double export_diff = 0.0; // largest entry change between the recorded and a fresh export
    double file_vs_external = 0.0;
    double system_vs_external = 0.0;
    bool strict_satisfied = false;
    std::string message;

    nlohmann::json to_json() const;
};

// Fixture JSON: {"system": "toy" | preset name, "theorem": 1|2, "box_bound", "sdpa": file,
// "external": {"solver", "status", "x", "block_min_eig"}}.
FixtureCheck check_fixture(const std::filesystem::path& fixture, double tol = 1e-6);

LmiSystem fixture_system(const nlohmann::json& fixture);
SdpaOptions fixture_options(const nlohmann::json& fixture);

} // namespace ncts
