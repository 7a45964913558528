#include <doctest.h>

#include "ncts/sdp.hpp"

using namespace ncts;

namespace {

LmiConstraint scalar_constraint(const std::string& name, Sense sense, double constant, double coef, int index) {
    BlockAssembler b(BlockLayout({1}));
    AffineMat value(Mat::Constant(1, 1, constant));
    if (coef != 0.0) {
        value += AffineMat::variable(index, Mat::Constant(1, 1, coef));
    }
    b.add(1, 1, value);
    return b.finalize(name, sense);
}

// 2 <= x <= 3
LmiSystem interval() {
    LmiSystem sys;
    sys.registry.add_scalar("x");
    sys.constraints.push_back(scalar_constraint("lower", Sense::positive_semidefinite, -2.0, 1.0, 0));
    sys.constraints.push_back(scalar_constraint("upper", Sense::positive_semidefinite, 3.0, -1.0, 0));
    return sys;
}

} // namespace

TEST_CASE("interval feasibility") {
    const LmiSystem sys = interval();
    const SdpSolution sol = solve(sys);
    REQUIRE(sol.feasible());
    CHECK(sol.x(0) >= 2.0 - 1e-9);
    CHECK(sol.x(0) <= 3.0 + 1e-9);
    for (const auto& r : sol.residuals) {
        CHECK(r.satisfied);
    }
    CHECK(sol.assignment.at("x")(0, 0) == sol.x(0));
}

TEST_CASE("constant violation is certified infeasible") {
    LmiSystem sys;
    sys.registry.add_scalar("x");
    sys.constraints.push_back(scalar_constraint("bad", Sense::negative_definite, 1.0, 0.0, 0));
    const SdpSolution sol = solve(sys);
    CHECK(sol.status == SolveStatus::infeasible_certificate);
    CHECK(sol.t >= 1.0 - 1e-6);
}

TEST_CASE("residual margins at a given point") {
    const LmiSystem sys = interval();
    const auto res = residuals(sys, Vec::Zero(1));
    REQUIRE(res.size() == 2);
    CHECK(res[0].margin == doctest::Approx(-2.0));
    CHECK_FALSE(res[0].satisfied);
    CHECK(res[1].margin == doctest::Approx(3.0));
    CHECK(res[1].satisfied);
    CHECK_THROWS(residuals(sys, std::map<std::string, Mat>{}));
}

TEST_CASE("phase-1 objective decreases monotonically") {
    const SdpSolution sol = solve(interval());
    REQUIRE(sol.t_history.size() > 1);
    for (std::size_t k = 1; k < sol.t_history.size(); ++k) {
        CHECK(sol.t_history[k] <= sol.t_history[k - 1] + 1e-12);
    }
}

TEST_CASE("solver output is self-consistent") {
    const LmiSystem sys = interval();
    const SdpSolution sol = solve(sys);
    const auto again = residuals(sys, sol.assignment);
    REQUIRE(again.size() == sol.residuals.size());
    for (std::size_t k = 0; k < again.size(); ++k) {
        CHECK(again[k].margin == doctest::Approx(sol.residuals[k].margin));
    }
    const SdpSolution twice = solve(sys);
    CHECK(twice.x == sol.x);
    CHECK(twice.t_history == sol.t_history);
}
