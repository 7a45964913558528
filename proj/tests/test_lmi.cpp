#include <doctest.h>

#include <random>

#include "ncts/lmi.hpp"
#include "ncts/roundtrip.hpp"
#include "support.hpp"

using namespace ncts;

namespace {

Vec random_point(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec x(n);
    for (int i = 0; i < n; ++i) {
        x(i) = u(rng);
    }
    return x;
}

} // namespace

TEST_CASE("affine matrices evaluate linearly") {
    VarRegistry reg;
    const AffineMat a = reg.add_scalar("a");
    const AffineMat b = reg.add_scalar("b");
    const Mat col = mat_from_rows({{1}, {2}});
    const Mat row = mat_from_rows({{3, -1}});
    const Mat m = col * row;
    const AffineMat expr = col * (2.0 * a) * row + AffineMat(Mat::Identity(2, 2)) - row.transpose() * b * col.transpose();
    const Vec x = (Vec(2) << 0.5, -3).finished();
    CHECK((expr.evaluate(x) - (Mat::Identity(2, 2) + m + 3.0 * m.transpose())).norm() < 1e-14);
    CHECK(He(expr).evaluate(x) == expr.evaluate(x) + expr.evaluate(x).transpose());
    CHECK(AffineMat::zero(2, 3).is_zero());
    CHECK_THROWS_AS(reg.add_scalar("a"), AssemblyError);
}

TEST_CASE("registry pack inverts assignment") {
    VarRegistry reg;
    reg.add_symmetric("P", 3);
    reg.add_full("K", 1, 2);
    reg.add_scalar("s");
    const Vec x = random_point(reg.scalar_count(), 4);
    CHECK(reg.pack(reg.assignment(x)) == x);
    CHECK(reg.value("P", x) == reg.value("P", x).transpose());
    auto partial = reg.assignment(x);
    partial.erase("K");
    CHECK_THROWS(reg.pack(partial));
}

TEST_CASE("block assembler mirrors and rejects bad tiling") {
    BlockLayout layout({2, 1});
    BlockAssembler b(layout);
    b.add(1, 1, AffineMat(Mat::Identity(2, 2)));
    b.add(2, 1, AffineMat(mat_from_rows({{3, 4}})));
    b.add(2, 2, AffineMat(Mat::Constant(1, 1, -1)));
    const LmiConstraint c = b.finalize("c", Sense::negative_definite);
    CHECK(c.constant == mat_from_rows({{1, 0, 3}, {0, 1, 4}, {3, 4, -1}}));
    CHECK_THROWS_AS(b.add(1, 2, AffineMat(Mat::Ones(2, 2))), AssemblyError);
    CHECK_THROWS_AS(b.add(3, 1, AffineMat(Mat::Ones(1, 2))), AssemblyError);
}

TEST_CASE("X2 parameterization keeps E X2 symmetric PSD") {
    SUBCASE("rank one") {
        VarRegistry reg;
        const Mat e = mat_from_rows({{1, 0}, {0, 0}});
        const StructuredVar sv = parameterize_X2(reg, e);
        REQUIRE(sv.psd_block.has_value());
        CHECK(sv.psd_block->rows() == 1);
        for (unsigned seed = 1; seed <= 10; ++seed) {
            const Vec x = random_point(reg.scalar_count(), seed);
            const Mat x2 = sv.value.evaluate(x);
            CHECK(std::abs(x2(0, 1)) < 1e-14);
            const Mat ex = e * x2;
            CHECK((ex - ex.transpose()).norm() < 1e-14);
            CHECK(ex(0, 0) == doctest::Approx(sv.psd_block->evaluate(x)(0, 0)));
        }
    }
    SUBCASE("identity") {
        VarRegistry reg;
        const StructuredVar sv = parameterize_X2(reg, Mat::Identity(2, 2));
        const Mat x2 = sv.value.evaluate(random_point(reg.scalar_count(), 9));
        CHECK((x2 - x2.transpose()).norm() < 1e-14);
        REQUIRE(sv.psd_block.has_value());
        CHECK(sv.psd_block->rows() == 2);
    }
    SUBCASE("zero descriptor") {
        VarRegistry reg;
        const StructuredVar sv = parameterize_X2(reg, Mat::Zero(2, 2));
        CHECK_FALSE(sv.psd_block.has_value());
        CHECK(reg.scalar_count() == 4);
    }
}

TEST_CASE("theorem assemblies") {
    const Preset& p = test::preset("case1");
    const LmiSystem t1 = build_theorem1(p.model, p.model.fault.mean(), p.scalars);
    const LmiSystem t2 = build_theorem2(p.model, p.scalars);

    CHECK(t1.constraint("main").size() == 63);
    CHECK(t2.constraint("main").size() == 63 + 16);
    for (const char* slack : {"slack_R1", "slack_R2", "slack_R3"}) {
        CHECK(t1.constraint(slack).size() == 8);
        CHECK(t1.constraint(slack).sense == Sense::positive_semidefinite);
    }
    int eps_tilde = 0;
    for (const auto& e : t2.registry.entries()) {
        eps_tilde += e.name.rfind("eps_tilde_", 0) == 0 ? 1 : 0;
    }
    CHECK(eps_tilde == 8);

    CHECK(missing_symbols(theorem1_symbols(), t1.symbols).empty());
    CHECK(missing_symbols(theorem2_symbols(), t2.symbols).empty());
    CHECK(missing_symbols({"Theta", "nonexistent"}, t2.symbols) == std::vector<std::string>{"nonexistent"});

    const Vec zero = Vec::Zero(t1.registry.scalar_count());
    const Vec x = random_point(t1.registry.scalar_count(), 21);
    for (const auto& c : t1.constraints) {
        CHECK(c.evaluate(zero) == c.constant);
        const Mat v = c.evaluate(x);
        CHECK(v == c.evaluate(x));
        CHECK(v == v.transpose());
        // affine: midpoint value is the mean of the endpoint values
        const Mat mid = c.evaluate(0.5 * x);
        CHECK((mid - 0.5 * (v + c.constant)).norm() <= 1e-12 * (1.0 + v.norm()));
    }
}

TEST_CASE("zero fault radius removes the fault border") {
    Preset p = test::preset("case1");
    p.model.fault.lower = p.model.fault.upper = Vec::Constant(1, 0.7);
    const LmiSystem t2 = build_theorem2(p.model, p.scalars);
    const LmiConstraint& main = t2.constraint("main");
    const Vec x = random_point(t2.registry.scalar_count(), 2);
    const Mat v = main.evaluate(x);
    for (int pair = 1; pair <= 8; ++pair) {
        const std::size_t cy = main.layout.index_of("Y_tilde_" + std::to_string(pair));
        const auto off = static_cast<Eigen::Index>(main.layout.offset(cy));
        // the column only carries its own diagonal entry
        CHECK(v.col(off).norm() == doctest::Approx(std::abs(v(off, off))));
    }
}

TEST_CASE("SDPA export") {
    CHECK(export_sdpa(toy_system()) == "1\n1\n1\n0\n0 1 1 1 1\n1 1 1 1 1\n");
    CHECK(export_sdpa(LmiSystem{}) == "0\n0\n\n\n");

    const Preset& p = test::preset("case1");
    const LmiSystem t1 = build_theorem1(p.model, p.model.fault.mean(), p.scalars);
    const SdpaProblem parsed = parse_sdpa(export_sdpa(t1));
    CHECK(parsed.m == t1.registry.scalar_count());
    // F(x) = sum x_i F_i - F_0 reproduces the assembled blocks with their orientation
    const Vec x = random_point(parsed.m, 8);
    const auto from_file = block_min_eigs(parsed, x);
    const auto from_system = system_block_min_eigs(t1, {}, x);
    REQUIRE(from_file.size() == from_system.size());
    for (std::size_t b = 0; b < from_file.size(); ++b) {
        CHECK(from_file[b] == doctest::Approx(from_system[b]).epsilon(1e-9));
    }

    CHECK_THROWS(parse_sdpa("1\n"));
    CHECK_THROWS(parse_sdpa("1\n1\n1\n0\n0 2 1 1 1\n"));
}
