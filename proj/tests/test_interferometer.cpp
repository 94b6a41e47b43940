#include "catch_amalgamated.hpp"

#include <cmath>
#include <numbers>

#include "cvlbi/interferometer.hpp"
#include "oracles.hpp"

using namespace cvlbi;
using Catch::Matchers::WithinAbs;

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

InterferometerConfig random_config(oracle::Rng& rng) {
    const auto [g1, g2] = rng.coherence();
    return {{rng.uniform(1e-6, 1.0), g1, g2},
            {rng.uniform(0.0, 10.0), rng.uniform(0.0, 2.0 * std::numbers::pi)}};
}

}  // namespace

TEST_CASE("beam splitter", "[interferometer]") {
    const Eigen::Matrix4d r = beam_splitter_matrix();
    const double h = 1.0 / std::sqrt(2.0);
    CHECK(r(0, 0) == h);
    CHECK(r(2, 0) == -h);
    CHECK(r(1, 3) == h);
    CHECK(max_abs(r * r.transpose() - Eigen::Matrix4d::Identity()) < 1e-15);
    CHECK(symplectic_residual(r) < 1e-15);

    Eigen::Matrix4d square = Eigen::Matrix4d::Zero();
    square.topRightCorner<2, 2>() = Eigen::Matrix2d::Identity();
    square.bottomLeftCorner<2, 2>() = -Eigen::Matrix2d::Identity();
    CHECK(max_abs(r * r - square) < 1e-15);
}

TEST_CASE("product to splitter permutation", "[interferometer]") {
    const auto& perm = product_to_splitter();
    // rows of (A1, A2, B1, B2) taken from (A1, B1, A2, B2)
    const std::vector<Index> expected{0, 1, 4, 5, 2, 3, 6, 7};
    for (Index i = 0; i < 8; ++i) CHECK(perm.source_index()[static_cast<std::size_t>(i)] == expected[static_cast<std::size_t>(i)]);
    CHECK(product_ordering().str() == "(x_A1, p_A1, x_B1, p_B1, x_A2, p_A2, x_B2, p_B2)");
    CHECK(splitter_ordering().str() == "(x_A1, p_A1, x_A2, p_A2, x_B1, p_B1, x_B2, p_B2)");
}

TEST_CASE("full output covariance", "[interferometer]") {
    SECTION("vacuum in, vacuum out") {
        const auto v = full_output_covariance({{1e-12, 0.0, 0.0}, {0.0, 0.0}});
        CHECK(max_abs(v.matrix() - Eigen::MatrixXd::Identity(8, 8)) < 1e-9);
        CHECK(v.ordering() == splitter_ordering());
    }
    SECTION("V_D blocks at eps = 0.1, g = 0.5, n = 1") {
        const auto v = full_output_covariance({{0.1, 0.5, 0.0}, {1.0, 0.0}});
        CHECK_THAT(v(0, 0), WithinAbs(2.05, 1e-14));
        CHECK_THAT(v(0, 2), WithinAbs(0.95, 1e-14));
        CHECK_THAT(v(5, 7), WithinAbs(0.95, 1e-14));
    }
    SECTION("pipeline matches the closed-form blocks and is physical") {
        oracle::Rng rng(303);
        double worst = 0.0;
        int unphysical = 0;
        for (int trial = 0; trial < 1000; ++trial) {
            const auto cfg = random_config(rng);
            const auto v = full_output_covariance(cfg);
            worst = std::max(worst, max_abs(v.matrix() - full_output_closed_form(cfg)));
            if (!check_physicality(v).physical) ++unphysical;
        }
        CHECK(worst <= 1e-12);
        CHECK(unphysical == 0);
    }
}

TEST_CASE("reduced covariance", "[interferometer]") {
    SECTION("worked example eps = 0.1, g = 0.5, n = 1, theta = 0") {
        const auto state = reduced_covariance({{0.1, 0.5, 0.0}, {1.0, 0.0}});
        const auto& v = state.v_r;
        const double root2 = std::numbers::sqrt2;
        CHECK(v.ordering().str() == "(x_A1, p_A2, x_B1, p_B2)");
        CHECK(v.ordering().is_reduced());
        for (Index i = 0; i < 4; ++i) CHECK_THAT(v(i, i), WithinAbs(2.05, 1e-14));
        CHECK_THAT(v(0, 2), WithinAbs((0.05 + 2.0 * root2) / 2.0, 1e-14));
        CHECK_THAT(v(0, 2), WithinAbs(1.4392136, 1e-7));
        CHECK_THAT(v(0, 3), WithinAbs(0.0, 1e-14));
        CHECK_THAT(v(1, 3), WithinAbs(-1.3892136, 1e-7));
        CHECK(state.discrepancy() <= 1e-12);
        CHECK(state.abbrev.a == Catch::Approx(1.1));
        CHECK(state.abbrev.b == Catch::Approx(3.0));
    }
    SECTION("zero squeezing") {
        const auto state = reduced_covariance({{0.2, 1.0, 0.0}, {0.0, 2.5}});
        Eigen::Matrix4d expected;
        expected << 2.2, 0, 0.2, 0,
                    0, 2.2, 0, 0.2,
                    0.2, 0, 2.2, 0,
                    0, 0.2, 0, 2.2;
        CHECK(max_abs(state.v_r.matrix() - 0.5 * expected) < 1e-14);
        CHECK(state.abbrev.d == 0.0);
        CHECK(state.abbrev.f == 0.0);
    }
    SECTION("dual-path equality, equal diagonals and positive definiteness") {
        oracle::Rng rng(404);
        double worst = 0.0;
        int failures = 0;
        for (int trial = 0; trial < 1000; ++trial) {
            const auto cfg = random_config(rng);
            const auto state = reduced_covariance(cfg);
            worst = std::max(worst, state.discrepancy());
            const auto& m = state.v_r.matrix();
            const double diag = (state.abbrev.a + state.abbrev.b) / 2.0;
            if (max_abs(m.diagonal().array() - diag) > 1e-12) ++failures;
            Eigen::LLT<Eigen::MatrixXd> llt(m);
            if (llt.info() != Eigen::Success || !(m.determinant() > 0.0)) ++failures;
        }
        CHECK(worst <= 1e-12);
        CHECK(failures == 0);
    }
}

TEST_CASE("telescope exchange symmetry", "[interferometer]") {
    // x_A1 <-> x_B1 and p_A2 <-> p_B2 in outcome order
    Eigen::Matrix4d swap = Eigen::Matrix4d::Zero();
    swap(0, 2) = swap(2, 0) = swap(1, 3) = swap(3, 1) = 1.0;

    oracle::Rng rng(505);
    double worst_conjugate = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto cfg = random_config(rng);
        const InterferometerConfig flipped{cfg.source.with_coherence(cfg.source.g1(), -cfg.source.g2()),
                                           cfg.resource};
        const Eigen::Matrix4d lhs = swap * outcome_covariance(cfg) * swap.transpose();
        worst_conjugate = std::max(worst_conjugate, max_abs(lhs - outcome_covariance(flipped)));
    }
    CHECK(worst_conjugate <= 1e-14);

    SECTION("flipping theta as well only holds without the sin(theta) term") {
        const SourceParams src(0.3, 0.2, 0.5);
        for (double theta : {0.0, std::numbers::pi}) {
            const InterferometerConfig cfg{src, {2.0, theta}};
            const InterferometerConfig flipped{src.with_coherence(0.2, -0.5), {2.0, -theta}};
            CHECK(max_abs(swap * outcome_covariance(cfg) * swap - outcome_covariance(flipped)) < 1e-14);
        }
        const InterferometerConfig cfg{src, {2.0, 1.0}};
        const InterferometerConfig flipped{src.with_coherence(0.2, -0.5), {2.0, -1.0}};
        CHECK(max_abs(swap * outcome_covariance(cfg) * swap - outcome_covariance(flipped)) > 1.0);
    }
}
