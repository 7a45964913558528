#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncts/lmi.hpp"

namespace ncts {

struct SolveOptions {
    double box_bound = 1e4; // |x_i| <= box_bound for every scalar variable
    int max_outer = 60;
    int max_inner = 50;
    double mu_start = 1.0;
    double mu_factor = 0.25;
    double gap_tol = 1e-8;
    double newton_tol = 1e-9;
    std::uint64_t seed = 0; // accepted for interface symmetry; the method is deterministic
};

enum class SolveStatus { feasible, infeasible_certificate, max_iter, numerical_failure };
const char* to_string(SolveStatus s);

struct ConstraintResidual {
    std::string name;
    Sense sense = Sense::negative_definite;
    double min_eig = 0.0;
    double max_eig = 0.0;
    // -max_eig for "< 0", min_eig for ">= 0"; nonnegative means satisfied
    double margin = 0.0;
    double strict_margin = 0.0; // delta for "< 0" constraints
    bool satisfied = false;
};

struct SdpSolution {
    SolveStatus status = SolveStatus::numerical_failure;
    Vec x;
    std::map<std::string, Mat> assignment;
    double t = 0.0;     // phase-1 objective at the returned point
    double delta = 0.0; // strictness margin used for the verdict
    std::vector<ConstraintResidual> residuals;
    std::vector<double> t_history; // t after every accepted Newton step
    int newton_iterations = 0;
    int outer_iterations = 0;
    double wall_time = 0.0;

    bool feasible() const { return status == SolveStatus::feasible; }
    const ConstraintResidual& residual(const std::string& name) const;
    nlohmann::json to_json() const;
};

SdpSolution solve(const LmiSystem& sys, const SolveOptions& opts = {});

std::vector<ConstraintResidual> residuals(const LmiSystem& sys, const std::map<std::string, Mat>& assignment);
std::vector<ConstraintResidual> residuals(const LmiSystem& sys, const Vec& x);

} // namespace ncts
