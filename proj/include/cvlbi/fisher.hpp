#pragma once

// Fisher information of the homodyne outcome distribution with respect to the
// mutual coherence (g1, g2).
//
// Three routes:
//   * fisher_analytic: the zero-mean Gaussian identity
//       F_ij = 1/2 tr(V^-1 dV/dg_i V^-1 dV/dg_j);
//   * fisher_monte_carlo: the defining expectation E[score score^T], with
//     outcomes drawn from the model and scores evaluated in closed form;
//   * fisher_limit_closed_form: the vanishing- and infinite-squeezing limits.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "cvlbi/errors.hpp"
#include "cvlbi/gaussian_core.hpp"
#include "cvlbi/interferometer.hpp"
#include "cvlbi/random.hpp"

namespace cvlbi {

/// 2x2 Fisher matrix over (g1, g2).
class FisherMatrix {
public:
    FisherMatrix() : entries_(Eigen::Matrix2d::Zero()) {}
    explicit FisherMatrix(const Eigen::Matrix2d& m) : entries_(0.5 * (m + m.transpose())) {}

    [[nodiscard]] const Eigen::Matrix2d& matrix() const { return entries_; }
    [[nodiscard]] double operator()(Index i, Index j) const { return entries_(i, j); }

    [[nodiscard]] Eigen::Vector2d eigenvalues() const {
        return Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(entries_, Eigen::EigenvaluesOnly)
            .eigenvalues();
    }

    /// Sum of singular values; for a symmetric matrix, the sum of |eigenvalues|.
    [[nodiscard]] double trace_norm() const { return eigenvalues().cwiseAbs().sum(); }

    [[nodiscard]] bool is_psd(double tol = 1e-9) const { return eigenvalues().minCoeff() >= -tol; }

private:
    Eigen::Matrix2d entries_;
};

using CovarianceDerivatives = std::array<Eigen::Matrix4d, 2>;

/// dV_r/dg1 and dV_r/dg2. Only the c = eps g1 and e = eps g2 slots move, so
/// both are constant in g, n and theta.
inline CovarianceDerivatives dv_dg(double epsilon) {
    const double h = 0.5 * epsilon;
    Eigen::Matrix4d d1 = Eigen::Matrix4d::Zero();
    d1(0, 2) = d1(2, 0) = h;
    d1(1, 3) = d1(3, 1) = h;
    Eigen::Matrix4d d2 = Eigen::Matrix4d::Zero();
    d2(0, 3) = d2(3, 0) = h;
    d2(1, 2) = d2(2, 1) = -h;
    return {d1, d2};
}

inline CovarianceDerivatives dv_dg(const InterferometerConfig& cfg) {
    return dv_dg(cfg.source.epsilon());
}

/// Precomputed pieces of d ln P / d g_i = -tr(V^-1 D_i)/2 + x^T V^-1 D_i V^-1 x / 2.
class ScoreModel {
public:
    ScoreModel(const Eigen::Matrix4d& v, const CovarianceDerivatives& dv) : llt_(outcome_factorization(v)) {
        const Eigen::Matrix4d v_inv = llt_.solve(Eigen::MatrixXd::Identity(4, 4));
        for (std::size_t i = 0; i < 2; ++i) {
            vinv_d_[i] = v_inv * dv[i];
            quad_[i] = vinv_d_[i] * v_inv;
            quad_[i] = 0.5 * (quad_[i] + quad_[i].transpose()).eval();
            trace_[i] = vinv_d_[i].trace();
        }
    }

    explicit ScoreModel(const InterferometerConfig& cfg)
        : ScoreModel(outcome_covariance(cfg), dv_dg(cfg)) {}

    [[nodiscard]] Eigen::Vector2d score(const Eigen::Vector4d& x) const {
        return {0.5 * (x.dot(quad_[0] * x) - trace_[0]), 0.5 * (x.dot(quad_[1] * x) - trace_[1])};
    }

    /// Gradient of the summed log-likelihood given the scatter matrix sum_k x_k x_k^T of `shots` outcomes.
    [[nodiscard]] Eigen::Vector2d score_from_scatter(const Eigen::Matrix4d& scatter, double shots) const {
        return {0.5 * ((quad_[0].cwiseProduct(scatter)).sum() - shots * trace_[0]),
                0.5 * ((quad_[1].cwiseProduct(scatter)).sum() - shots * trace_[1])};
    }

    /// 1/2 tr(V^-1 D_i V^-1 D_j)
    [[nodiscard]] FisherMatrix fisher() const {
        Eigen::Matrix2d f;
        for (Index i = 0; i < 2; ++i) {
            for (Index j = 0; j < 2; ++j) {
                f(i, j) = 0.5 * (vinv_d_[static_cast<std::size_t>(i)] *
                                 vinv_d_[static_cast<std::size_t>(j)]).trace();
            }
        }
        return FisherMatrix(f);
    }

    [[nodiscard]] const Eigen::LLT<Eigen::MatrixXd>& factorization() const { return llt_; }

private:
    Eigen::LLT<Eigen::MatrixXd> llt_;
    std::array<Eigen::Matrix4d, 2> vinv_d_;
    std::array<Eigen::Matrix4d, 2> quad_;
    std::array<double, 2> trace_{};
};

inline FisherMatrix fisher_analytic(const InterferometerConfig& cfg) {
    return ScoreModel(cfg).fisher();
}

struct MonteCarloFisher {
    FisherMatrix estimate;
    Eigen::Matrix2d standard_error = Eigen::Matrix2d::Zero();
    Eigen::Vector2d mean_score = Eigen::Vector2d::Zero();
    Eigen::Vector2d mean_score_error = Eigen::Vector2d::Zero();
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;
};

/// Samples per Monte Carlo chunk. Chunk k draws from NormalStream(derive_seed(seed, k))
/// and chunk sums are reduced in chunk order, so the result depends only on
/// (seed, samples) whatever the thread count.
inline constexpr std::uint64_t kMonteCarloChunk = 1u << 16;
inline constexpr std::uint64_t kMinMonteCarloSamples = 1000;

namespace detail {

struct ScoreSums {
    std::uint64_t n = 0;
    Eigen::Vector2d s = Eigen::Vector2d::Zero();        // sum of scores
    Eigen::Vector2d s2 = Eigen::Vector2d::Zero();       // sum of squared scores
    Eigen::Matrix2d outer = Eigen::Matrix2d::Zero();    // sum of s s^T
    Eigen::Matrix2d outer2 = Eigen::Matrix2d::Zero();   // sum of (s_i s_j)^2

    void add(const Eigen::Vector2d& v) {
        ++n;
        s += v;
        s2 += v.cwiseAbs2();
        const Eigen::Matrix2d o = v * v.transpose();
        outer += o;
        outer2 += o.cwiseAbs2();
    }

    void merge(const ScoreSums& o) {
        n += o.n;
        s += o.s;
        s2 += o.s2;
        outer += o.outer;
        outer2 += o.outer2;
    }
};

/// Runs body(k) for k in [0, count) on up to hardware_concurrency threads.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
    const std::size_t workers =
        std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t k = 0; k < count; ++k) body(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < count; k = next++) body(k);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace detail

inline MonteCarloFisher fisher_monte_carlo(const InterferometerConfig& cfg, std::uint64_t samples,
                                           std::uint64_t seed) {
    if (samples < kMinMonteCarloSamples) {
        throw ValidationError("samples must be >= 1000");
    }
    const ScoreModel model(cfg);
    const Eigen::Matrix4d chol = model.factorization().matrixL().toDenseMatrix();

    const std::uint64_t chunks = (samples + kMonteCarloChunk - 1) / kMonteCarloChunk;
    std::vector<detail::ScoreSums> partial(chunks);
    detail::parallel_for(chunks, [&](std::size_t k) {
        const std::uint64_t begin = k * kMonteCarloChunk;
        const std::uint64_t end = std::min(samples, begin + kMonteCarloChunk);
        NormalStream normal(derive_seed(seed, k));
        detail::ScoreSums sums;
        Eigen::Vector4d z;
        for (std::uint64_t i = begin; i < end; ++i) {
            for (Index j = 0; j < 4; ++j) z(j) = normal();
            sums.add(model.score(chol * z));
        }
        partial[k] = sums;
    });
    detail::ScoreSums total;
    for (const auto& p : partial) total.merge(p);

    const double n = static_cast<double>(total.n);
    MonteCarloFisher out;
    out.samples = samples;
    out.seed = seed;
    const Eigen::Matrix2d mean_outer = total.outer / n;
    out.estimate = FisherMatrix(mean_outer);
    const Eigen::Matrix2d var_outer = (total.outer2 / n - mean_outer.cwiseAbs2()) * (n / (n - 1.0));
    out.standard_error = (var_outer.cwiseMax(0.0) / n).cwiseSqrt();
    out.mean_score = total.s / n;
    const Eigen::Vector2d var_s = (total.s2 / n - out.mean_score.cwiseAbs2()) * (n / (n - 1.0));
    out.mean_score_error = (var_s.cwiseMax(0.0) / n).cwiseSqrt();
    return out;
}

enum class SqueezingLimit { vanishing, infinite };

/// Closed-form Fisher matrices in the n -> 0 and n -> infinity limits.
inline FisherMatrix fisher_limit_closed_form(double epsilon, double g1, double g2, SqueezingLimit which) {
    const SourceParams src(epsilon, g1, g2);  // validates
    const double e = src.epsilon();
    const double e2 = e * e;
    const double gg = src.coherence_norm_squared();
    const double diag_g1 = (1.0 + g1 * g1 - g2 * g2) * e2;
    const double diag_g2 = (1.0 - g1 * g1 + g2 * g2) * e2;
    const double off = 2.0 * g1 * g2 * e2;

    double prefactor = 0.0;
    double base = 0.0;
    if (which == SqueezingLimit::vanishing) {
        const double q = std::numbers::sqrt2 * e / (4.0 + 4.0 * e - (gg - 1.0) * e2);
        prefactor = q * q;
        base = 4.0 + 4.0 * e;
    } else {
        const double q = e / (1.0 + 2.0 * e - (gg - 1.0) * e2);
        prefactor = q * q;
        base = 1.0 + 2.0 * e;
    }
    Eigen::Matrix2d m;
    m << base + diag_g1, off,
         off,            base + diag_g2;
    return FisherMatrix(prefactor * m);
}

inline const char* to_string(SqueezingLimit which) {
    return which == SqueezingLimit::vanishing ? "n_bar->0" : "n_bar->inf";
}

}  // namespace cvlbi
