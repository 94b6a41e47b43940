#pragma once

// Two telescopes, each mixing its share of the source (A1 / B1) with its half
// of the squeezed resource (A2 / B2) on a balanced beam splitter, followed by
// homodyne detection of x_A1, p_A2, x_B1 and p_B2.
//
// The output covariance is computed two ways: by running the Gaussian pipeline
// (product state, reorder, beam splitters, reduction) and by the closed-form
// block expressions. The closed form is the oracle; the pipeline is what the
// tests exercise.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "cvlbi/gaussian_core.hpp"
#include "cvlbi/states.hpp"

namespace cvlbi {

struct InterferometerConfig {
    SourceParams source;
    TmsvParams resource;
};

/// The measured quadratures, in outcome-vector order.
inline std::vector<QuadratureLabel> measured_labels() {
    return {x_of("A1"), p_of("A2"), x_of("B1"), p_of("B2")};
}

/// Ordering of the product state as written: source modes first, then resource.
inline QuadratureOrdering product_ordering() {
    return QuadratureOrdering::of_modes({"A1", "B1", "A2", "B2"});
}

/// Ordering in which the beam splitters act: each telescope's two modes adjacent.
inline QuadratureOrdering splitter_ordering() {
    return QuadratureOrdering::of_modes({"A1", "A2", "B1", "B2"});
}

/// (A1, B1, A2, B2) -> (A1, A2, B1, B2).
inline const Permutation& product_to_splitter() {
    static const Permutation perm = Permutation::between(product_ordering(), splitter_ordering());
    return perm;
}

/// Balanced beam splitter on (x_m1, p_m1, x_m2, p_m2).
inline Eigen::Matrix4d beam_splitter_matrix() {
    const double h = 1.0 / std::numbers::sqrt2;
    Eigen::Matrix4d r;
    r <<  h,  0, h, 0,
          0,  h, 0, h,
         -h,  0, h, 0,
          0, -h, 0, h;
    return r;
}

/// Shorthand entries of the measured covariance.
struct Abbreviations {
    double a = 0;  // eps + 1
    double b = 0;  // 2 n + 1
    double c = 0;  // eps g1
    double d = 0;  // 2 cos(theta) sqrt(n (n + 1))
    double e = 0;  // eps g2
    double f = 0;  // 2 sin(theta) sqrt(n (n + 1))
};

inline Abbreviations abbreviations(const InterferometerConfig& cfg) {
    const double eps = cfg.source.epsilon();
    const double corr = cfg.resource.correlation();
    return {eps + 1.0,
            2.0 * cfg.resource.n_bar() + 1.0,
            eps * cfg.source.g1(),
            corr * std::cos(cfg.resource.theta()),
            eps * cfg.source.g2(),
            corr * std::sin(cfg.resource.theta())};
}

/// 8x8 covariance after both beam splitters, in (A1, A2, B1, B2) ordering,
/// computed by the Gaussian pipeline.
inline CovarianceMatrix full_output_covariance(const InterferometerConfig& cfg) {
    const auto product = direct_sum(astronomical_covariance(cfg.source),
                                    tmsv_covariance_closed(cfg.resource));
    const auto reordered = permute_modes(product, splitter_ordering());
    const Eigen::Matrix4d r = beam_splitter_matrix();
    return apply_symplectic(reordered, block_diagonal(r, r));
}

/// The same 8x8 matrix from the closed-form V_D, V_12, V_21 blocks.
inline Eigen::MatrixXd full_output_closed_form(const InterferometerConfig& cfg) {
    const auto [a, b, c, d, e, f] = abbreviations(cfg);
    Eigen::Matrix4d vd;
    vd << a + b,      0, -a + b,      0,
              0,  a + b,      0, -a + b,
         -a + b,      0,  a + b,      0,
              0, -a + b,      0,  a + b;
    Eigen::Matrix4d v12;
    v12 <<  c + d, -e + f, -c + d,   e + f,
            e + f,  c - d, -e + f, -(c + d),
           -c + d,  e + f,  c + d,  -e + f,
           -e + f, -(c + d), e + f,  c - d;
    Eigen::Matrix4d v21;
    v21 <<  c + d,  e + f, -c + d,  -e + f,
           -e + f,  c - d,  e + f, -(c + d),
           -c + d, -e + f,  c + d,   e + f,
            e + f, -(c + d), -e + f, c - d;
    Eigen::MatrixXd out(8, 8);
    out << vd, v12, v21, vd;
    return 0.5 * out;
}

/// Covariance of the measured outcomes (x_A1, p_A2, x_B1, p_B2) in closed form.
inline Eigen::Matrix4d outcome_covariance(const Abbreviations& ab) {
    const auto [a, b, c, d, e, f] = ab;
    Eigen::Matrix4d v;
    v << a + b,      0,  c + d, e + f,
             0,  a + b, -e + f, c - d,
         c + d, -e + f,  a + b,     0,
         e + f,  c - d,      0, a + b;
    return 0.5 * v;
}

inline Eigen::Matrix4d outcome_covariance(const InterferometerConfig& cfg) {
    return outcome_covariance(abbreviations(cfg));
}

struct ReducedState {
    CovarianceMatrix v_r;           // from the pipeline
    Eigen::Matrix4d closed_form;    // from the abbreviations
    Abbreviations abbrev;

    [[nodiscard]] double discrepancy() const {
        return (v_r.matrix() - closed_form).cwiseAbs().maxCoeff();
    }
};

inline ReducedState reduced_covariance(const InterferometerConfig& cfg) {
    const auto ab = abbreviations(cfg);
    return {reduce(full_output_covariance(cfg), measured_labels()), outcome_covariance(ab), ab};
}

}  // namespace cvlbi
