#pragma once

// Input states of the two-telescope setup: the bipartite thermal source seen by
// telescopes A and B (modes A1, B1) and the two-mode squeezed vacuum resource
// distributed to the same sites (modes A2, B2).

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>

#include "cvlbi/errors.hpp"
#include "cvlbi/gaussian_core.hpp"

namespace cvlbi {

/// Slack on |g| <= 1 that absorbs decimal round-off in parsed inputs.
inline constexpr double kCoherenceSlack = 1e-12;

/// Astronomical source: photon flux per coherence time and complex mutual coherence g1 + i g2.
class SourceParams {
public:
    SourceParams(double epsilon, double g1, double g2) : epsilon_(epsilon), g1_(g1), g2_(g2) {
        if (!std::isfinite(epsilon_) || !(epsilon_ > 0.0)) {
            throw ValidationError("epsilon must be > 0");
        }
        if (!std::isfinite(g1_) || !std::isfinite(g2_)) {
            throw ValidationError("g1 and g2 must be finite");
        }
        if (std::hypot(g1_, g2_) > 1.0 + kCoherenceSlack) {
            std::ostringstream os;
            os << "|g| ≤ 1 violated (g1=" << g1_ << ", g2=" << g2_
               << ", |g|=" << std::hypot(g1_, g2_) << ")";
            throw ValidationError(os.str());
        }
    }

    [[nodiscard]] double epsilon() const { return epsilon_; }
    [[nodiscard]] double g1() const { return g1_; }
    [[nodiscard]] double g2() const { return g2_; }
    [[nodiscard]] double coherence_norm_squared() const { return g1_ * g1_ + g2_ * g2_; }

    /// Same source with a different coherence; used by likelihood evaluation.
    [[nodiscard]] SourceParams with_coherence(double g1, double g2) const {
        return {epsilon_, g1, g2};
    }

private:
    double epsilon_;
    double g1_;
    double g2_;
};

/// Reduces an angle into [0, 2 pi).
inline double wrap_angle(double theta) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double t = std::fmod(theta, two_pi);
    if (t < 0.0) t += two_pi;
    if (t >= two_pi) t = 0.0;
    return t;
}

/// Two-mode squeezed vacuum: mean photon number per mode and squeezing phase.
///
/// The squeezing magnitude r satisfies 2 n + 1 = cosh 2r, i.e. n = sinh^2 r,
/// which is the form used for conversion in both directions.
class TmsvParams {
public:
    TmsvParams(double n_bar, double theta) : n_bar_(n_bar), theta_(wrap_angle(theta)) {
        if (!std::isfinite(n_bar_) || n_bar_ < 0.0) throw ValidationError("n_bar must be >= 0");
        if (!std::isfinite(theta)) throw ValidationError("theta must be finite");
        r_ = std::asinh(std::sqrt(n_bar_));
    }

    static TmsvParams from_squeezing(double r, double theta) {
        if (!std::isfinite(r) || r < 0.0) throw ValidationError("squeezing r must be >= 0");
        const double s = std::sinh(r);
        TmsvParams p(s * s, theta);
        p.r_ = r;
        return p;
    }

    [[nodiscard]] double n_bar() const { return n_bar_; }
    [[nodiscard]] double theta() const { return theta_; }
    [[nodiscard]] double r() const { return r_; }

    /// 2 sqrt(n (n + 1)), the magnitude of the cross correlations.
    [[nodiscard]] double correlation() const { return 2.0 * std::sqrt(n_bar_ * (n_bar_ + 1.0)); }

private:
    double n_bar_;
    double theta_;
    double r_ = 0.0;
};

inline QuadratureOrdering source_ordering() { return QuadratureOrdering::of_modes({"A1", "B1"}); }
inline QuadratureOrdering resource_ordering() { return QuadratureOrdering::of_modes({"A2", "B2"}); }

inline CovarianceMatrix vacuum_covariance(const QuadratureOrdering& ordering) {
    return {ordering, Eigen::MatrixXd::Identity(ordering.size(), ordering.size())};
}

/// Covariance of the thermal source in (x_A1, p_A1, x_B1, p_B1):
///   diagonal eps + 1, cross block eps * [[g1, -g2], [g2, g1]].
inline CovarianceMatrix astronomical_covariance(const SourceParams& p) {
    const double eps = p.epsilon();
    Eigen::Matrix2d cross;
    cross << eps * p.g1(), -eps * p.g2(),
             eps * p.g2(),  eps * p.g1();
    Eigen::MatrixXd v = (eps + 1.0) * Eigen::MatrixXd::Identity(4, 4);
    v.topRightCorner<2, 2>() = cross;
    v.bottomLeftCorner<2, 2>() = cross.transpose();
    return {source_ordering(), std::move(v)};
}

/// cos(theta) sigma_z + sin(theta) sigma_x
inline Eigen::Matrix2d rotation_zx(double theta) {
    Eigen::Matrix2d r;
    r << std::cos(theta),  std::sin(theta),
         std::sin(theta), -std::cos(theta);
    return r;
}

inline CovarianceMatrix tmsv_covariance_closed(const TmsvParams& p) {
    const Eigen::Matrix2d cross = p.correlation() * rotation_zx(p.theta());
    Eigen::MatrixXd v = (2.0 * p.n_bar() + 1.0) * Eigen::MatrixXd::Identity(4, 4);
    v.topRightCorner<2, 2>() = cross;
    v.bottomLeftCorner<2, 2>() = cross;
    return {resource_ordering(), std::move(v)};
}

/// Omega H for the two-mode squeeze with magnitude r and phase theta, in
/// (x_a, p_a, x_b, p_b) ordering. Its exponential is the squeezer S.
inline Eigen::Matrix4d tmsv_generator(double r, double theta) {
    const double c = r * std::cos(theta);
    const double s = r * std::sin(theta);
    Eigen::Matrix4d g;
    g << 0, 0, c,  s,
         0, 0, s, -c,
         c, s, 0,  0,
         s, -c, 0, 0;
    return g;
}

inline Eigen::MatrixXd two_mode_squeezer(const TmsvParams& p) {
    return matrix_exponential(tmsv_generator(p.r(), p.theta()));
}

/// Same state as tmsv_covariance_closed, built as S S^T with S = exp(Omega H).
inline CovarianceMatrix tmsv_covariance_exponential(const TmsvParams& p) {
    const Eigen::MatrixXd s = two_mode_squeezer(p);
    return apply_symplectic(vacuum_covariance(resource_ordering()), s);
}

}  // namespace cvlbi
