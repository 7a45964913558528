#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "ncts/simulator.hpp"
#include "support.hpp"

using namespace ncts;

namespace {

const GainCertificate& gains(const std::string& name) { return *test::synthesized(name).certificate; }

Scenario short_run(const std::string& name, double horizon) {
    Scenario s = test::preset(name).build_scenario();
    s.horizon = horizon;
    return s;
}

double max_abs_state(const SimTrace& tr) {
    double m = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        m = std::max(m, tr.state(i).cwiseAbs().maxCoeff());
    }
    return m;
}

} // namespace

TEST_CASE("signals") {
    const Scenario s = test::preset("case1").build_scenario();
    CHECK(eval_signal(s.disturbance, std::numbers::pi / 2)(0) == doctest::Approx(1.0));
    CHECK(eval_signal(s.disturbance, 6.0)(0) == 0.0);
    CHECK(eval_signal(s.disturbance, 5.0)(0) == 0.0);
    CHECK(eval_attack(s.attack, Vec::Zero(2), 0.0).isZero());
    const Vec x = (Vec(2) << 10.0, -3.0).finished();
    const Vec f = eval_attack(s.attack, x, 0.0);
    CHECK(f(0) == doctest::Approx(-std::tanh(0.2)));
    CHECK(f(1) == doctest::Approx(std::tanh(0.3)));

    const SignalSpec tab = SignalSpec::table({0.0, 1.0, 3.0}, {Vec::Constant(1, 2.0), Vec::Constant(1, 4.0),
                                                               Vec::Constant(1, 0.0)});
    CHECK(eval_signal(tab, 1.0)(0) == 4.0);
    CHECK(eval_signal(tab, 0.25)(0) == doctest::Approx(2.5));
    CHECK(eval_signal(tab, 2.0)(0) == doctest::Approx(2.0));
    CHECK(eval_signal(tab, -1.0)(0) == 2.0);
    CHECK(eval_signal(tab, 9.0)(0) == 0.0);
}

TEST_CASE("signal JSON round trip") {
    const Scenario s = test::preset("case1").build_scenario();
    const Scenario back = scenario_from_json(scenario_to_json(s), test::preset("case1").model);
    CHECK(scenario_to_json(back) == scenario_to_json(s));
    nlohmann::json bad = scenario_to_json(s);
    bad["wind"] = 1;
    CHECK_THROWS(scenario_from_json(bad, test::preset("case1").model));
}

TEST_CASE("scenario validation") {
    const CascadeModel& md = test::preset("case1").model;
    Scenario s = test::preset("case1").build_scenario();
    CHECK(validate_scenario(s, md).ok());
    s.step = -1.0;
    CHECK_FALSE(validate_scenario(s, md).ok());
    s = test::preset("case1").build_scenario();
    s.x1_0 = Vec::Zero(3);
    CHECK_FALSE(validate_scenario(s, md).ok());
    CHECK_THROWS_AS(run(md, gains("case1"), s), SimulationError);
}

TEST_CASE("equilibrium stays at zero") {
    CascadeModel md = test::preset("case1").model;
    md.beta_bar = 0.0;
    Scenario s = zero_initial(short_run("case1", 3.0));
    s.disturbance = SignalSpec::zero(1);
    const SimTrace tr = run(md, gains("case1"), s);
    CHECK(max_abs_state(tr) <= 1e-12);
}

TEST_CASE("runs are deterministic and seed dependent") {
    const Scenario s = short_run("case1", 3.0);
    const SimTrace a = run(test::preset("case1").model, gains("case1"), s);
    const SimTrace b = run(test::preset("case1").model, gains("case1"), s);
    std::ostringstream ca, cb;
    write_csv(a, ca);
    write_csv(b, cb);
    CHECK(ca.str() == cb.str());

    Scenario other = s;
    other.seed = s.seed + 1;
    std::ostringstream cc;
    write_csv(run(test::preset("case1").model, gains("case1"), other), cc);
    CHECK(cc.str() != ca.str());
}

TEST_CASE("trace invariants") {
    const Preset& p = test::preset("case1");
    const SimTrace tr = run(p.model, gains("case1"), short_run("case1", 4.0));
    REQUIRE(tr.size() == 4001);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        CHECK((tr.sat_u2[i] + tr.psi_u2[i] - tr.u2[i]).cwiseAbs().maxCoeff() == 0.0);
        CHECK(tr.alg_residual[i] < 1e-9);
        CHECK(tr.sat_u2[i].cwiseAbs().maxCoeff() <= p.model.saturation_limits(0));
    }
    for (const auto& smp : tr.samples) {
        if (smp.beta == 1) {
            CHECK(smp.source == InputSource::attack_path);
        } else {
            CHECK(smp.source == (smp.alpha == 1 ? InputSource::time_path : InputSource::event_path));
        }
        if (smp.alpha == 1 && smp.beta == 0) {
            CHECK(smp.released);
        }
    }
}

TEST_CASE("release ratios") {
    SUBCASE("time-triggered releases every sample") {
        const SimTrace tr = run(test::preset("case2").model, gains("case2"), short_run("case2", 5.0));
        CHECK(transmission_stats(tr).ratio == 1.0);
    }
    SUBCASE("zero threshold releases every nonzero error") {
        CascadeModel md = test::preset("case3").model;
        md.mu = 0.0;
        md.beta_bar = 0.0;
        const SimTrace tr = run(md, gains("case3"), short_run("case3", 5.0));
        CHECK(transmission_stats(tr).ratio == 1.0);
    }
    SUBCASE("event trigger skips samples") {
        const SimTrace tr = run(test::preset("case3").model, gains("case3"), short_run("case3", 15.0));
        const TransmissionStats st = transmission_stats(tr);
        CHECK(st.samples == 151);
        CHECK(st.ratio < 1.0);
        CHECK(st.time_path == 0);
    }
}

TEST_CASE("CSV round trip") {
    const SimTrace tr = run(test::preset("case1").model, gains("case1"), short_run("case1", 1.0));
    std::stringstream ss;
    write_csv(tr, ss);
    const SimTrace back = read_csv(ss);
    REQUIRE(back.size() == tr.size());
    for (std::size_t i = 0; i < tr.size(); i += 97) {
        CHECK(back.t[i] == tr.t[i]);
        // ten significant digits
        CHECK((back.x2[i] - tr.x2[i]).cwiseAbs().maxCoeff() <= 1e-9 * tr.x2[i].cwiseAbs().maxCoeff());
        CHECK((back.y1[i] - tr.y1[i]).cwiseAbs().maxCoeff() <= 1e-9 * tr.y1[i].cwiseAbs().maxCoeff());
        CHECK(back.released[i] == tr.released[i]);
    }
}
