#include <doctest.h>

#include <algorithm>

#include "ncts/synthesis.hpp"
#include "support.hpp"

using namespace ncts;

namespace {

Mat published_case1_K2() { return mat_from_rows({{-3.8497, -2.4732}}); }

// Slow mode of (diag(1,0), A) when a(1,1) != 0: s = a00 - a01 a10 / a11.
double slow_root(const Mat& a) { return a(0, 0) - a(0, 1) * a(1, 0) / a(1, 1); }

} // namespace

TEST_CASE("published Case 1 gain certifies") {
    const CascadeModel& md = test::preset("case1").model;
    const CertReport r = certify_closed_loop(md, published_case1_K2());
    CHECK(r.regular);
    CHECK(r.impulse_free);
    CHECK(r.rank_e == 1);
    REQUIRE(r.slow_eigenvalues.size() == 1);
    const double ref = slow_root(md.A2 + md.B2 * published_case1_K2());
    CHECK(r.slow_eigenvalues[0].real() == doctest::Approx(ref).epsilon(1e-9));
    CHECK(r.slow_eigenvalues[0].real() == doctest::Approx(-0.218).epsilon(0.015));
    CHECK(r.admissible());
}

TEST_CASE("zero gain leaves the open-loop impulse") {
    const CertReport r = certify_closed_loop(test::preset("case1").model, Mat::Zero(1, 2));
    CHECK(r.regular);
    CHECK_FALSE(r.impulse_free);
    CHECK_FALSE(r.admissible());
}

TEST_CASE("nonsingular descriptor reduces to an eigenvalue check") {
    CascadeModel md = test::preset("case1").model;
    md.E = Mat::Identity(2, 2);
    const CertReport r = certify_closed_loop(md, published_case1_K2());
    CHECK(r.impulse_free);
    CHECK(r.slow_eigenvalues.size() == 2);
    const Mat acl = md.A2 + md.B2 * published_case1_K2();
    const double tr = acl.trace();
    const double det = acl.determinant();
    CHECK(r.slow_stable == (tr < 0.0 && det > 0.0));
}

TEST_CASE("case presets synthesize and certify") {
    for (const char* name : {"case1", "case2", "case3"}) {
        CAPTURE(name);
        const SynthesisResult& res = test::synthesized(name);
        REQUIRE(res.ok());
        REQUIRE(res.certificate.has_value());
        const GainCertificate& c = *res.certificate;
        CHECK(c.admissibility.admissible());
        CHECK(c.K1.rows() == 1);
        CHECK(c.K1.cols() == 2);
        CHECK(c.K2.cols() == 2);
        CHECK(min_eig_sym(c.W) > 0.0);
        CHECK(c.cond_X1 < kMaxConditionNumber);
        for (const auto& r : res.solution.residuals) {
            CAPTURE(r.name);
            CHECK(r.satisfied);
            if (r.sense == Sense::negative_definite) {
                CHECK(r.margin >= 0.5 * r.strict_margin);
            }
        }
    }
}

TEST_CASE("certificate JSON round trip") {
    const GainCertificate& c = *test::synthesized("case1").certificate;
    const GainCertificate back = certificate_from_json(c.to_json());
    CHECK(back.K2 == c.K2);
    CHECK(back.K1 == c.K1);
    CHECK(back.W == c.W);
    CHECK(back.decision == c.decision);
    CHECK(back.cond_X1 == c.cond_X1);
}

TEST_CASE("synthesis is deterministic") {
    const Preset& p = test::preset("case1");
    const SynthesisResult again = synthesize(p.model, p.scalars, p.fault_spec());
    REQUIRE(again.ok());
    CHECK(again.certificate->to_json().dump() == test::synthesized("case1").certificate->to_json().dump());
}

TEST_CASE("large gamma is infeasible") {
    Preset p = test::preset("case1");
    p.model.dissipativity.gamma = 50.0;
    const SynthesisResult res = synthesize(p.model, p.scalars, p.fault_spec());
    CHECK(res.status == SynthesisStatus::infeasible);
    CHECK_FALSE(res.certificate.has_value());
}

TEST_CASE("gamma threshold bracket") {
    // bisection over [0.1, 50] with width 0.05 ended at [1.2208, 1.2695]
    for (const auto& [gamma, feasible] : {std::pair{1.2, true}, std::pair{1.3, false}}) {
        CAPTURE(gamma);
        Preset p = test::preset("case1");
        p.model.dissipativity.gamma = gamma;
        CHECK(synthesize(p.model, p.scalars, p.fault_spec()).ok() == feasible);
    }
}

TEST_CASE("ill-conditioned decision values are rejected") {
    std::map<std::string, Mat> d = test::synthesized("case1").certificate->decision;
    d["X1"] = mat_from_rows({{1, 0}, {0, 1e-12}});
    CHECK_THROWS_AS(extract_gains(test::preset("case1").model, d), ExtractionError);
    d.erase("X2");
    CHECK_THROWS_AS(extract_gains(test::preset("case1").model, d), ExtractionError);
}
