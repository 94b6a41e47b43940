#include "catch_amalgamated.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

#include "cvlbi/gaussian_core.hpp"
#include "cvlbi/interferometer.hpp"
#include "cvlbi/states.hpp"
#include "oracles.hpp"

using namespace cvlbi;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

CovarianceMatrix identity_on(const std::vector<std::string>& modes) {
    return vacuum_covariance(QuadratureOrdering::of_modes(modes));
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("orderings validate labels", "[gaussian-core]") {
    CHECK_THROWS_AS(QuadratureOrdering({x_of("A"), x_of("A")}, true), ValidationError);
    CHECK_THROWS_AS(QuadratureOrdering({x_of("A"), p_of("B")}, false), ValidationError);
    CHECK_THROWS_AS(QuadratureOrdering({p_of("A"), x_of("A")}, false), ValidationError);
    CHECK_NOTHROW(QuadratureOrdering({x_of("A1"), p_of("A2")}, true));

    const auto o = QuadratureOrdering::of_modes({"A1", "B1"});
    CHECK(o.str() == "(x_A1, p_A1, x_B1, p_B1)");
    CHECK(o.index_of(p_of("B1")) == 3);
    CHECK_FALSE(o.index_of(p_of("Z")).has_value());
    CHECK(parse_label("p_B2") == p_of("B2"));
    CHECK_THROWS_AS(parse_label("q_B2"), ValidationError);
}

TEST_CASE("covariance matrices must be symmetric", "[gaussian-core]") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2);
    m(0, 1) = 1e-11;
    CHECK_THROWS_AS(CovarianceMatrix(QuadratureOrdering::of_modes({"A"}), m), ValidationError);
    m(0, 1) = 1e-13;
    CHECK_NOTHROW(CovarianceMatrix(QuadratureOrdering::of_modes({"A"}), m));
    CHECK_THROWS_AS(CovarianceMatrix(QuadratureOrdering::of_modes({"A", "B"}), m), ValidationError);
}

TEST_CASE("symplectic form", "[gaussian-core]") {
    const auto omega = symplectic_form(3);
    CHECK(max_abs(omega + omega.transpose()) == 0.0);
    CHECK(max_abs(omega * omega + Eigen::MatrixXd::Identity(6, 6)) == 0.0);
}

TEST_CASE("direct_sum", "[gaussian-core]") {
    SECTION("vacuum with vacuum") {
        const auto v = direct_sum(identity_on({"A1", "B1"}), identity_on({"A2", "B2"}));
        CHECK(v.dim() == 8);
        CHECK(max_abs(v.matrix() - Eigen::MatrixXd::Identity(8, 8)) == 0.0);
        CHECK(v.ordering() == QuadratureOrdering::of_modes({"A1", "B1", "A2", "B2"}));
    }
    SECTION("incoherent source with vacuum") {
        const auto v = direct_sum(astronomical_covariance({0.1, 0.0, 0.0}), identity_on({"A2", "B2"}));
        Eigen::MatrixXd expected = Eigen::MatrixXd::Identity(8, 8);
        expected.topLeftCorner(4, 4) *= 1.1;
        CHECK(max_abs(v.matrix() - expected) < 1e-15);
    }
    SECTION("mode collision") {
        CHECK_THROWS_AS(direct_sum(identity_on({"A1", "B1"}), identity_on({"A1", "B2"})), ValidationError);
    }
}

TEST_CASE("permute_modes", "[gaussian-core]") {
    oracle::Rng rng(11);
    const auto order = QuadratureOrdering::of_modes({"A", "B", "C", "D"});

    SECTION("identity permutation") {
        const CovarianceMatrix v(order, rng.symmetric(8));
        CHECK(permute_modes(v, order).matrix() == v.matrix());
    }
    SECTION("swapping modes swaps blocks") {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
        m.topLeftCorner(2, 2) << 2, 0.5, 0.5, 3;
        m.bottomRightCorner(2, 2) << 7, 0, 0, 9;
        const CovarianceMatrix v(QuadratureOrdering::of_modes({"A", "B"}), m);
        const auto w = permute_modes(v, QuadratureOrdering::of_modes({"B", "A"}));
        CHECK(w.matrix().topLeftCorner(2, 2) == m.bottomRightCorner(2, 2));
        CHECK(w.matrix().bottomRightCorner(2, 2) == m.topLeftCorner(2, 2));
        CHECK(w.at(x_of("A"), p_of("A")) == 0.5);
    }
    SECTION("round trip is exact and matches P V P^T") {
        for (int trial = 0; trial < 50; ++trial) {
            const CovarianceMatrix v(order, rng.symmetric(8));
            std::vector<std::string> modes{"A", "B", "C", "D"};
            std::shuffle(modes.begin(), modes.end(), rng.engine);
            const auto target = QuadratureOrdering::of_modes(modes);
            const auto w = permute_modes(v, target);
            CHECK(permute_modes(w, order).matrix() == v.matrix());
            const auto p = Permutation::between(order, target).matrix();
            CHECK(max_abs(p * v.matrix() * p.transpose() - w.matrix()) == 0.0);
        }
    }
    SECTION("target must be a permutation") {
        const CovarianceMatrix v(order, rng.symmetric(8));
        CHECK_THROWS_AS(permute_modes(v, QuadratureOrdering::of_modes({"A", "B", "C", "E"})), ValidationError);
        CHECK_THROWS_AS(permute_modes(v, QuadratureOrdering::of_modes({"A", "B"})), ValidationError);
    }
}

TEST_CASE("apply_symplectic", "[gaussian-core]") {
    SECTION("identity transform") {
        const auto v = astronomical_covariance({0.3, 0.2, -0.4});
        CHECK(apply_symplectic(v, Eigen::MatrixXd::Identity(4, 4)).matrix() == v.matrix());
    }
    SECTION("vacuum is invariant under the beam splitter") {
        const auto v = apply_symplectic(identity_on({"A1", "A2"}), beam_splitter_matrix());
        CHECK(max_abs(v.matrix() - Eigen::MatrixXd::Identity(4, 4)) < 1e-15);
    }
    SECTION("two-mode squeezer on vacuum gives the TMSV covariance") {
        const double r = 0.7, theta = 1.1;
        const auto v = apply_symplectic(identity_on({"A2", "B2"}), oracle::squeezer(r, theta));
        const auto closed = tmsv_covariance_closed(TmsvParams::from_squeezing(r, theta));
        CHECK(max_abs(v.matrix() - closed.matrix()) < 1e-13);
    }
    SECTION("non-symplectic transform is rejected with its residual") {
        Eigen::MatrixXd s = Eigen::MatrixXd::Identity(4, 4);
        s(0, 0) = 2.0;
        try {
            apply_symplectic(identity_on({"A", "B"}), s);
            FAIL("expected rejection");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("not symplectic") != std::string::npos);
            CHECK(std::string(e.what()).find("= 1") != std::string::npos);
        }
    }
    SECTION("property: symmetry, physicality and determinant are preserved") {
        oracle::Rng rng(5);
        for (int trial = 0; trial < 200; ++trial) {
            const auto [g1, g2] = rng.coherence();
            const auto v = astronomical_covariance({rng.uniform(0.01, 2.0), g1, g2});
            const Eigen::MatrixXd s = oracle::random_two_mode_symplectic(rng);
            const auto w = apply_symplectic(v, s);
            CHECK(w.matrix() == w.matrix().transpose());
            CHECK(check_physicality(w).physical);
            CHECK_THAT(w.matrix().determinant(), WithinRel(v.matrix().determinant(), 1e-9));
        }
    }
}

TEST_CASE("matrix_exponential", "[gaussian-core]") {
    SECTION("exp(0) = I") {
        CHECK(matrix_exponential(Eigen::MatrixXd::Zero(4, 4)) == Eigen::MatrixXd::Identity(4, 4));
    }
    SECTION("squeeze generator at r = 1, theta = 0") {
        const auto s = matrix_exponential(tmsv_generator(1.0, 0.0));
        Eigen::Matrix4d expected;
        const double ch = std::cosh(1.0), sh = std::sinh(1.0);
        expected << ch, 0, sh, 0,
                    0, ch, 0, -sh,
                    sh, 0, ch, 0,
                    0, -sh, 0, ch;
        CHECK(max_abs(s - expected) < 1e-12);
    }
    SECTION("diagonal matrices against the scalar exponential") {
        oracle::Rng rng(3);
        for (int trial = 0; trial < 100; ++trial) {
            Eigen::VectorXd a(5);
            for (int i = 0; i < 5; ++i) a(i) = rng.uniform(-8.0, 8.0);
            const auto e = matrix_exponential(Eigen::MatrixXd(a.asDiagonal()));
            for (int i = 0; i < 5; ++i) CHECK_THAT(e(i, i), WithinRel(std::exp(a(i)), 1e-12));
            CHECK(max_abs(e - Eigen::MatrixXd(e.diagonal().asDiagonal())) == 0.0);
        }
    }
    SECTION("general matrices against Eigen's scaling-and-squaring") {
        oracle::Rng rng(4);
        for (double scale : {1e-3, 0.1, 0.5, 1.5, 4.0, 12.0}) {
            for (int trial = 0; trial < 20; ++trial) {
                Eigen::MatrixXd m(6, 6);
                for (int i = 0; i < 36; ++i) m(i) = scale * rng.normal();
                const Eigen::MatrixXd ref = m.exp();
                const double rel = max_abs(matrix_exponential(m) - ref) / max_abs(ref);
                CHECK(rel < 1e-10);
            }
        }
    }
    SECTION("property: exp(Omega H) equals the closed-form squeezer on the grid") {
        double worst = 0.0;
        for (int i = 0; i <= 8; ++i) {
            for (int k = 0; k < 8; ++k) {
                const double r = 0.25 * i, theta = k * std::numbers::pi / 4.0;
                worst = std::max(worst, max_abs(matrix_exponential(tmsv_generator(r, theta)) - oracle::squeezer(r, theta)));
            }
        }
        CHECK(worst <= 1e-10);
    }
    SECTION("non-square input is rejected") {
        CHECK_THROWS_AS(matrix_exponential(Eigen::MatrixXd::Zero(2, 3)), ValidationError);
    }
}

TEST_CASE("reduce", "[gaussian-core]") {
    oracle::Rng rng(8);
    const auto order = QuadratureOrdering::of_modes({"A1", "A2", "B1", "B2"});
    const CovarianceMatrix v(order, rng.symmetric(8));

    SECTION("keeping every label leaves the matrix unchanged") {
        const auto w = reduce(v, order.labels());
        CHECK(w.matrix() == v.matrix());
        CHECK(w.ordering().is_reduced());
    }
    SECTION("single label gives the variance") {
        const auto w = reduce(v, {p_of("B1")});
        CHECK(w.dim() == 1);
        CHECK(w(0, 0) == v.at(p_of("B1"), p_of("B1")));
    }
    SECTION("measured labels on V_f give the closed-form V_r") {
        const InterferometerConfig cfg{{0.1, 0.3, 0.2}, {1.0, 0.7}};
        const auto w = reduce(full_output_covariance(cfg), measured_labels());
        CHECK(max_abs(w.matrix() - outcome_covariance(cfg)) < 1e-12);
    }
    SECTION("unknown label") {
        CHECK_THROWS_AS(reduce(v, {x_of("C1")}), ValidationError);
    }
    SECTION("property: reduce after permute equals index bookkeeping") {
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<std::string> modes{"A1", "A2", "B1", "B2"};
            std::shuffle(modes.begin(), modes.end(), rng.engine);
            const auto permuted = permute_modes(v, QuadratureOrdering::of_modes(modes));
            std::vector<QuadratureLabel> keep;
            for (const auto& l : order.labels())
                if (rng.uniform(0, 1) < 0.5) keep.push_back(l);
            std::shuffle(keep.begin(), keep.end(), rng.engine);
            if (keep.empty()) continue;
            const auto w = reduce(permuted, keep);
            for (std::size_t i = 0; i < keep.size(); ++i)
                for (std::size_t j = 0; j < keep.size(); ++j)
                    CHECK(w(static_cast<Index>(i), static_cast<Index>(j)) == v.at(keep[i], keep[j]));
        }
    }
}

TEST_CASE("gaussian_log_pdf", "[gaussian-core]") {
    const double log2pi = std::log(2.0 * std::numbers::pi);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(4, 4);

    CHECK_THAT(gaussian_log_pdf(id, Eigen::VectorXd::Zero(4)), WithinAbs(-2.0 * log2pi, 1e-14));
    CHECK_THAT(gaussian_log_pdf(id, Eigen::Vector4d(1, 0, 0, 0)), WithinAbs(-2.0 * log2pi - 0.5, 1e-14));

    SECTION("singular and ill-conditioned covariances are rejected") {
        Eigen::MatrixXd s = id;
        s(3, 3) = 0.0;
        CHECK_THROWS_AS(gaussian_log_pdf(s, Eigen::VectorXd::Zero(4)), NumericalError);
        s(3, 3) = 1e-13;
        CHECK_THROWS_AS(gaussian_log_pdf(s, Eigen::VectorXd::Zero(4)), NumericalError);
    }
    SECTION("dimension mismatch") {
        CHECK_THROWS_AS(gaussian_log_pdf(id, Eigen::VectorXd::Zero(3)), ValidationError);
    }
    SECTION("density integrates to one (importance-sampling quadrature)") {
        const InterferometerConfig cfg{{0.1, 0.3, 0.2}, {1.0, 0.0}};
        const Eigen::MatrixXd v = outcome_covariance(cfg);
        const double s2 = 1.5 * v.selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff();
        oracle::Rng rng(21);
        const int n = 200000;
        double sum = 0.0, sum2 = 0.0;
        for (int k = 0; k < n; ++k) {
            Eigen::VectorXd x(4);
            for (int j = 0; j < 4; ++j) x(j) = std::sqrt(s2) * rng.normal();
            const double w = std::exp(gaussian_log_pdf(v, x)) / oracle::isotropic_pdf(x, s2);
            sum += w;
            sum2 += w * w;
        }
        const double mean = sum / n;
        const double se = std::sqrt((sum2 / n - mean * mean) / n);
        CHECK(se < 0.006);
        CHECK_THAT(mean, WithinAbs(1.0, 4.0 * se));
    }
}

TEST_CASE("check_physicality", "[gaussian-core]") {
    const auto vac = check_physicality(identity_on({"A", "B"}));
    CHECK(vac.physical);
    CHECK_THAT(vac.min_eigenvalue, WithinAbs(0.0, 1e-14));

    const auto tmsv = check_physicality(tmsv_covariance_closed({1.0, 0.0}));
    CHECK(tmsv.physical);
    CHECK_THAT(tmsv.min_eigenvalue, WithinAbs(0.0, 1e-12));

    const CovarianceMatrix half(QuadratureOrdering::of_modes({"A", "B"}), 0.5 * Eigen::MatrixXd::Identity(4, 4));
    const auto sub = check_physicality(half);
    CHECK_FALSE(sub.physical);
    CHECK_THAT(sub.min_eigenvalue, WithinAbs(-0.5, 1e-14));

    CHECK_THROWS_AS(check_physicality(reduce(identity_on({"A", "B"}), {x_of("A")})), ValidationError);
}
