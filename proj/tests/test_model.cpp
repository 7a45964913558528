#include <doctest.h>

#include <cmath>

#include "ncts/model.hpp"
#include "support.hpp"

using namespace ncts;

namespace {

CascadeModel plant() { return test::preset("case1").model; }

// det(sE - A) for E = diag(1, 0) is (s - a00)(-a11) - a01 a10.
struct Linear {
    double slope;
    double offset;
};
Linear det_diag10(const Mat& a) { return {-a(1, 1), a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)}; }

} // namespace

TEST_CASE("case model validates") {
    const auto report = validate(plant());
    CHECK_MESSAGE(report.ok(), report.summary());
}

TEST_CASE("validation names the offending field") {
    SUBCASE("B2 rows") {
        CascadeModel md = plant();
        md.B2 = Mat::Ones(3, 1);
        const auto r = validate(md);
        CHECK_FALSE(r.ok());
        CHECK(r.mentions("B2"));
    }
    SUBCASE("mu range") {
        CascadeModel md = plant();
        md.mu = 1.2;
        const auto r = validate(md);
        CHECK_FALSE(r.ok());
        CHECK(r.mentions("mu"));
    }
}

TEST_CASE("bernoulli_moments") {
    CHECK(bernoulli_moments(0.0).mean == 0.0);
    CHECK(bernoulli_moments(0.0).variance == 0.0);
    CHECK(bernoulli_moments(1.0).mean == 1.0);
    CHECK(bernoulli_moments(1.0).variance == 0.0);
    CHECK(bernoulli_moments(0.25).mean == doctest::Approx(0.25));
    CHECK(bernoulli_moments(0.25).variance == doctest::Approx(0.1875));
    CHECK_THROWS(bernoulli_moments(1.5));
    CHECK_THROWS(bernoulli_moments(-0.1));
}

TEST_CASE("pencil regularity and impulse-freeness") {
    const Mat e = mat_from_rows({{1, 0}, {0, 0}});
    const Mat a2 = mat_from_rows({{1.3, 1}, {0.2, 0}});

    SUBCASE("open loop") {
        const auto r = is_regular_impulse_free(e, a2);
        CHECK(r.regular);
        CHECK_FALSE(r.impulse_free);
        CHECK(r.degree == 0);
        CHECK(r.coefficients.at(0) == doctest::Approx(-0.2));
    }
    SUBCASE("closed loop with a stabilizing row") {
        const Mat b2 = mat_from_rows({{0.2}, {1}});
        const Mat k2 = mat_from_rows({{-3.8497, -2.4732}});
        const Mat acl = a2 + b2 * k2;
        const auto r = is_regular_impulse_free(e, acl);
        const Linear ref = det_diag10(acl);
        CHECK(r.regular);
        CHECK(r.impulse_free);
        CHECK(r.degree == 1);
        CHECK(r.coefficients.at(1) == doctest::Approx(ref.slope).epsilon(1e-9));
        CHECK(r.coefficients.at(0) == doctest::Approx(ref.offset).epsilon(1e-9));
        CHECK(ref.slope == doctest::Approx(2.4732));
        CHECK(ref.offset == doctest::Approx(0.538).epsilon(1e-2));
    }
    SUBCASE("identity descriptor") {
        const auto r = is_regular_impulse_free(Mat::Identity(2, 2), a2);
        CHECK(r.regular);
        CHECK(r.impulse_free);
        CHECK(r.degree == 2);
    }
    SUBCASE("singular pencil") {
        const auto r = is_regular_impulse_free(e, mat_from_rows({{1, 0}, {0, 0}}));
        CHECK_FALSE(r.regular);
        CHECK(r.degree == -1);
    }
    SUBCASE("scale invariance") {
        for (double c : {-3.0, 0.01, 250.0}) {
            const auto r = is_regular_impulse_free(c * e, c * a2);
            CHECK(r.regular);
            CHECK_FALSE(r.impulse_free);
        }
    }
}

TEST_CASE("model JSON round trip and strictness") {
    const CascadeModel md = plant();
    const nlohmann::json j = model_to_json(md);
    const CascadeModel back = model_from_json(j);
    CHECK(model_to_json(back) == j);
    CHECK(back.A2 == md.A2);

    nlohmann::json extra = j;
    extra["trigger"]["period"] = 0.1;
    CHECK_THROWS_AS(model_from_json(extra), ModelFormatError);

    nlohmann::json missing = j;
    missing["secondary"].erase("E");
    CHECK_THROWS_AS(model_from_json(missing), ModelFormatError);

    nlohmann::json ragged = j;
    ragged["primary"]["A1"] = {{1, 2}, {3}};
    CHECK_THROWS_AS(model_from_json(ragged), ModelFormatError);
}

TEST_CASE("scalar overrides") {
    CascadeModel md = plant();
    apply_override(md, "gamma", 0.5);
    apply_override(md, "mu", 0.3);
    CHECK(md.dissipativity.gamma == 0.5);
    CHECK(md.mu == 0.3);
    CHECK(is_model_scalar("alpha_bar"));
    CHECK_FALSE(is_model_scalar("A1"));
    CHECK_THROWS_AS(apply_override(md, "A1", 1.0), std::invalid_argument);
}
