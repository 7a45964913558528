#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "ncts/numerics.hpp"

using namespace ncts;

namespace {

Mat random_symmetric(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat m(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            m(i, j) = m(j, i) = u(rng);
        }
    }
    return m;
}

} // namespace

TEST_CASE("min_eig_sym on simple matrices") {
    CHECK(min_eig_sym(Mat::Identity(3, 3)) == doctest::Approx(1.0));
    CHECK(min_eig_sym(mat_from_rows({{3, 0}, {0, -2}})) == doctest::Approx(-2.0));
    CHECK(max_eig_sym(mat_from_rows({{3, 0}, {0, -2}})) == doctest::Approx(3.0));
}

TEST_CASE("min_eig_sym agrees with the general eigen solver") {
    for (unsigned seed = 1; seed <= 20; ++seed) {
        const Mat m = random_symmetric(5, seed);
        Eigen::EigenSolver<Mat> general(m, false);
        double lo = 1e300;
        for (Eigen::Index i = 0; i < 5; ++i) {
            CHECK(std::abs(general.eigenvalues()(i).imag()) < 1e-12);
            lo = std::min(lo, general.eigenvalues()(i).real());
        }
        CHECK(std::abs(min_eig_sym(m) - lo) < 1e-9);
        // det(M - lambda I) vanishes at the reported value
        const double d = (m - min_eig_sym(m) * Mat::Identity(5, 5)).determinant();
        CHECK(std::abs(d) < 1e-9);
    }
}

TEST_CASE("symmetric eigen routines reject bad input") {
    CHECK_THROWS_AS(min_eig_sym(Mat(2, 3)), DimensionError);
    CHECK_THROWS_AS(min_eig_sym(mat_from_rows({{1, 2}, {0, 1}})), DimensionError);
    CHECK_THROWS_AS(mat_from_rows({{1, 2}, {3}}), DimensionError);
}

TEST_CASE("dae_coordinates") {
    SUBCASE("canonical") {
        const auto d = dae_coordinates(mat_from_rows({{1, 0}, {0, 0}}));
        CHECK(d.rank == 1);
        CHECK((d.U.cwiseAbs() - Mat::Identity(2, 2)).norm() < 1e-12);
        CHECK((d.V.cwiseAbs() - Mat::Identity(2, 2)).norm() < 1e-12);
    }
    SUBCASE("nonsingular") {
        const auto d = dae_coordinates(Mat::Identity(3, 3));
        CHECK(d.rank == 3);
        CHECK(d.U_alg().cols() == 0);
    }
    SUBCASE("random rank 2") {
        std::mt19937 rng(7);
        std::normal_distribution<double> g;
        Mat a(4, 2), b(2, 4);
        for (auto* m : {&a, &b}) {
            for (Eigen::Index i = 0; i < m->size(); ++i) {
                m->data()[i] = g(rng);
            }
        }
        const Mat e = a * b;
        const auto d = dae_coordinates(e);
        REQUIRE(d.rank == 2);
        Mat core = Mat::Zero(4, 4);
        core.topLeftCorner(2, 2) = d.sigma.asDiagonal();
        CHECK((d.U.transpose() * e * d.V - core).norm() < 1e-10);
        CHECK((d.U.transpose() * d.U - Mat::Identity(4, 4)).norm() < 1e-12);
    }
}

TEST_CASE("block layout and symmetric placement") {
    BlockLayout layout({2, 1});
    const std::size_t k = layout.append(3, "tail");
    CHECK(k == 3);
    Mat m0 = Mat::Zero(6, 6);
    CHECK(layout.total() == 6);
    CHECK(layout.offset(3) == 3);
    CHECK(layout.index_of("tail") == 3);
    CHECK_THROWS_AS(layout.size(4), DimensionError);
    CHECK_THROWS_AS(set_block(m0, layout, 1, 2, Mat::Zero(2, 2)), DimensionError);

    Mat m = Mat::Zero(6, 6);
    const Mat blk = mat_from_rows({{1, 2, 3}, {4, 5, 6}});
    set_block(m, layout, 1, 3, blk);
    CHECK(get_block(m, layout, 1, 3) == blk);
    CHECK(get_block(m, layout, 3, 1).isZero());
    set_sym_block(m, layout, 1, 3, blk);
    CHECK(get_block(m, layout, 3, 1) == blk.transpose());
    CHECK(m == m.transpose());
}

TEST_CASE("block_diag, sym_part, sqrtm_psd") {
    const Mat d = block_diag({Mat::Constant(1, 1, 2.0), Mat::Identity(2, 2)});
    CHECK(d.rows() == 3);
    CHECK(d(0, 0) == 2.0);
    CHECK(d(0, 1) == 0.0);
    CHECK(sym_part(mat_from_rows({{0, 2}, {0, 0}})) == mat_from_rows({{0, 1}, {1, 0}}));

    const Mat a = random_symmetric(4, 3);
    const Mat psd = a * a.transpose();
    const Mat r = sqrtm_psd(psd);
    CHECK((r * r - psd).norm() < 1e-10);
    CHECK_THROWS(sqrtm_psd(mat_from_rows({{-1, 0}, {0, 1}})));
}

TEST_CASE("pencil_det") {
    const Mat e = mat_from_rows({{1, 0}, {0, 0}});
    const Mat a = mat_from_rows({{1.3, 1}, {0.2, 0}});
    for (double s : {-2.0, 0.0, 0.5, 3.0}) {
        CHECK(pencil_det(e, a, s) == doctest::Approx(-0.2));
    }
    CHECK(numeric_rank(e) == 1);
}
