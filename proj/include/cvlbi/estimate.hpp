#pragma once

// Maximum-likelihood estimation of the mutual coherence from simulated
// homodyne records, and the comparison of its spread with the Cramer-Rao
// bound F^-1 / M.
//
// eps, n and theta are treated as known; only (g1, g2) is estimated, over the
// closed unit disk. The likelihood depends on a record only through its shot
// count and scatter matrix sum_k x_k x_k^T, so large records can be simulated
// without storing them (sample_scatter draws exactly what sample_records would).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "cvlbi/errors.hpp"
#include "cvlbi/fisher.hpp"
#include "cvlbi/interferometer.hpp"
#include "cvlbi/random.hpp"

namespace cvlbi {

using OutcomeMatrix = Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>;

struct ScatterSummary {
    std::uint64_t shots = 0;
    Eigen::Matrix4d scatter = Eigen::Matrix4d::Zero();

    void add(const Eigen::Vector4d& x) {
        ++shots;
        scatter.noalias() += x * x.transpose();
    }
};

/// M homodyne outcomes (rows: x_A1, p_A2, x_B1, p_B2) with the config and seed that produced them.
class MeasurementRecord {
public:
    MeasurementRecord(InterferometerConfig config, OutcomeMatrix outcomes, std::uint64_t seed)
        : config_(std::move(config)), outcomes_(std::move(outcomes)), seed_(seed) {
        if (outcomes_.rows() < 1) throw ValidationError("measurement record needs at least one shot");
        if (!outcomes_.allFinite()) throw ValidationError("measurement record has non-finite outcomes");
    }

    [[nodiscard]] const InterferometerConfig& config() const { return config_; }
    [[nodiscard]] const OutcomeMatrix& outcomes() const { return outcomes_; }
    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] std::uint64_t shots() const { return static_cast<std::uint64_t>(outcomes_.rows()); }

    [[nodiscard]] ScatterSummary summary() const {
        ScatterSummary s;
        for (Index k = 0; k < outcomes_.rows(); ++k) s.add(outcomes_.row(k).transpose());
        return s;
    }

private:
    InterferometerConfig config_;
    OutcomeMatrix outcomes_;
    std::uint64_t seed_;
};

namespace detail {

inline Eigen::Matrix4d outcome_cholesky(const InterferometerConfig& cfg) {
    return outcome_factorization(outcome_covariance(cfg)).matrixL().toDenseMatrix();
}

template <class Sink>
void draw_outcomes(const InterferometerConfig& cfg, std::uint64_t shots, std::uint64_t seed, Sink&& sink) {
    if (shots < 1) throw ValidationError("shots must be >= 1");
    const Eigen::Matrix4d chol = outcome_cholesky(cfg);
    NormalStream normal(seed);
    Eigen::Vector4d z;
    for (std::uint64_t k = 0; k < shots; ++k) {
        for (Index j = 0; j < 4; ++j) z(j) = normal();
        sink(k, Eigen::Vector4d(chol * z));
    }
}

}  // namespace detail

/// i.i.d. rows L z with L L^T = V_r and z standard normal from NormalStream(seed).
inline MeasurementRecord sample_records(const InterferometerConfig& cfg, std::uint64_t shots, std::uint64_t seed) {
    if (shots < 1) throw ValidationError("shots must be >= 1");
    OutcomeMatrix out(static_cast<Index>(shots), 4);
    detail::draw_outcomes(cfg, shots, seed, [&](std::uint64_t k, const Eigen::Vector4d& x) {
        out.row(static_cast<Index>(k)) = x.transpose();
    });
    return {cfg, std::move(out), seed};
}

/// Scatter matrix of the record sample_records(cfg, shots, seed) would return.
inline ScatterSummary sample_scatter(const InterferometerConfig& cfg, std::uint64_t shots, std::uint64_t seed) {
    ScatterSummary s;
    detail::draw_outcomes(cfg, shots, seed, [&](std::uint64_t, const Eigen::Vector4d& x) { s.add(x); });
    return s;
}

/// Summed log-density of the shots under coherence (g1, g2), other parameters from cfg.
inline double log_likelihood(const ScatterSummary& data, const InterferometerConfig& cfg, double g1, double g2) {
    if (data.shots < 1) throw ValidationError("log_likelihood needs at least one shot");
    const InterferometerConfig at{cfg.source.with_coherence(g1, g2), cfg.resource};
    const auto llt = outcome_factorization(outcome_covariance(at));
    const double m = static_cast<double>(data.shots);
    const Eigen::Matrix4d vinv_s = llt.solve(Eigen::MatrixXd(data.scatter));
    return -0.5 * vinv_s.trace() - 0.5 * m * (4.0 * std::log(2.0 * std::numbers::pi) + log_determinant(llt));
}

inline double log_likelihood(const MeasurementRecord& record, double g1, double g2) {
    return log_likelihood(record.summary(), record.config(), g1, g2);
}

/// d/d(g1, g2) of log_likelihood.
inline Eigen::Vector2d log_likelihood_gradient(const ScatterSummary& data, const InterferometerConfig& cfg,
                                               double g1, double g2) {
    const InterferometerConfig at{cfg.source.with_coherence(g1, g2), cfg.resource};
    return ScoreModel(at).score_from_scatter(data.scatter, static_cast<double>(data.shots));
}

struct MleResult {
    Eigen::Vector2d g_hat = Eigen::Vector2d::Zero();
    double log_likelihood = 0.0;
    /// Norm of the per-shot projected gradient at g_hat.
    double gradient_norm = 0.0;
    int iterations = 0;
    bool on_boundary = false;
};

class OptimizerError : public NumericalError {
public:
    OptimizerError(const std::string& what, Eigen::Vector2d best) : NumericalError(what), best_(std::move(best)) {}
    [[nodiscard]] const Eigen::Vector2d& best_iterate() const { return best_; }

private:
    Eigen::Vector2d best_;
};

inline constexpr int kMaxMleIterations = 500;
inline constexpr double kMleGradientTolerance = 1e-8;

namespace detail {

inline Eigen::Vector2d project_to_disk(const Eigen::Vector2d& g) {
    const double n = g.norm();
    return n > 1.0 ? Eigen::Vector2d(g / n) : g;
}

/// Starting point from the sample covariance: c = V02 + V13, e = V03 - V12.
inline Eigen::Vector2d moment_initializer(const ScatterSummary& data, double epsilon) {
    const Eigen::Matrix4d s = data.scatter / static_cast<double>(data.shots);
    return project_to_disk({(s(0, 2) + s(1, 3)) / epsilon, (s(0, 3) - s(1, 2)) / epsilon});
}

/// Projected BFGS on the per-shot negative log-likelihood, preconditioned by
/// the inverse Fisher matrix at the start point.
inline MleResult projected_quasi_newton(const ScatterSummary& data, const InterferometerConfig& cfg,
                                        Eigen::Vector2d x) {
    const double m = static_cast<double>(data.shots);
    auto objective = [&](const Eigen::Vector2d& g) { return -log_likelihood(data, cfg, g(0), g(1)) / m; };
    auto gradient = [&](const Eigen::Vector2d& g) {
        return Eigen::Vector2d(-log_likelihood_gradient(data, cfg, g(0), g(1)) / m);
    };
    auto fisher_inverse = [&](const Eigen::Vector2d& g) {
        const InterferometerConfig at{cfg.source.with_coherence(g(0), g(1)), cfg.resource};
        return Eigen::Matrix2d(fisher_analytic(at).matrix().inverse());
    };
    // Stationarity measure valid on the boundary too: x - P(x - grad).
    auto stationarity = [](const Eigen::Vector2d& at, const Eigen::Vector2d& grad) {
        return (at - project_to_disk(at - grad)).norm();
    };

    x = project_to_disk(x);
    double fx = objective(x);
    Eigen::Vector2d gx = gradient(x);
    Eigen::Matrix2d h = fisher_inverse(x);

    for (int it = 0; it < kMaxMleIterations; ++it) {
        const double measure = stationarity(x, gx);
        if (measure <= kMleGradientTolerance) {
            return {x, -fx * m, measure, it, x.norm() >= 1.0 - 1e-12};
        }

        bool stepped = false;
        for (int attempt = 0; attempt < 2 && !stepped; ++attempt) {
            // Quasi-Newton direction first, then a fresh Fisher-scoring direction.
            const Eigen::Vector2d dir = attempt == 0 ? Eigen::Vector2d(-h * gx) : Eigen::Vector2d(-fisher_inverse(x) * gx);
            double alpha = 1.0;
            for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
                const Eigen::Vector2d trial = project_to_disk(x + alpha * dir);
                const Eigen::Vector2d step = trial - x;
                const double slope = gx.dot(step);
                if (step.norm() < 1e-300) break;
                if (slope >= 0.0) continue;
                const double ft = objective(trial);
                if (ft <= fx + 1e-4 * slope) {
                    const Eigen::Vector2d gt = gradient(trial);
                    const Eigen::Vector2d y = gt - gx;
                    const double sy = step.dot(y);
                    if (sy > 1e-300) {
                        const double rho = 1.0 / sy;
                        const Eigen::Matrix2d ident = Eigen::Matrix2d::Identity();
                        h = (ident - rho * step * y.transpose()) * h * (ident - rho * y * step.transpose()) +
                            rho * step * step.transpose();
                    }
                    x = trial;
                    fx = ft;
                    gx = gt;
                    stepped = true;
                    break;
                }
            }
            if (!stepped) h = fisher_inverse(x);
        }
        if (!stepped) {
            // No decrease is representable at this point: accept it if it is
            // stationary to within the objective's rounding level.
            const double measure_now = stationarity(x, gx);
            if (measure_now <= 1e3 * kMleGradientTolerance) {
                return {x, -fx * m, measure_now, it, x.norm() >= 1.0 - 1e-12};
            }
            std::ostringstream os;
            os << "MLE line search failed at g = (" << x(0) << ", " << x(1) << "), stationarity " << measure_now;
            throw OptimizerError(os.str(), x);
        }
    }
    std::ostringstream os;
    os << "MLE did not converge in " << kMaxMleIterations << " iterations; best g = (" << x(0) << ", " << x(1) << ")";
    throw OptimizerError(os.str(), x);
}

}  // namespace detail

/// Maximizer of the likelihood over |g| <= 1, multi-started from g = 0 and
/// from the moment initializer.
inline MleResult mle(const ScatterSummary& data, const InterferometerConfig& cfg) {
    if (data.shots < 1) throw ValidationError("mle needs at least one shot");
    const std::array<Eigen::Vector2d, 2> starts{Eigen::Vector2d::Zero(),
                                                detail::moment_initializer(data, cfg.source.epsilon())};
    std::optional<MleResult> best;
    std::optional<OptimizerError> failure;
    for (const auto& s : starts) {
        try {
            auto r = detail::projected_quasi_newton(data, cfg, s);
            if (!best || r.log_likelihood > best->log_likelihood) best = r;
        } catch (const OptimizerError& e) {
            if (!failure) failure = e;
        }
    }
    if (!best) throw *failure;
    return *best;
}

inline MleResult mle(const MeasurementRecord& record) { return mle(record.summary(), record.config()); }

inline constexpr std::uint64_t kMinReplications = 30;

struct EstimateResult {
    InterferometerConfig config;
    std::uint64_t shots = 0;
    std::uint64_t replications = 0;
    std::uint64_t seed = 0;
    std::vector<Eigen::Vector2d> estimates;     // replication order
    Eigen::Vector2d g_hat_mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d covariance_hat = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d crb = Eigen::Matrix2d::Zero();
    double trace_ratio = 0.0;
    /// Smallest eigenvalue of covariance_hat - crb and its sampling standard error when the estimator attains the bound.
    double min_excess_eigenvalue = 0.0;
    double excess_standard_error = 0.0;
    std::uint64_t boundary_estimates = 0;

    [[nodiscard]] bool within_efficiency_window() const { return trace_ratio >= 0.8 && trace_ratio <= 1.5; }
    [[nodiscard]] bool consistent_with_bound(double sigmas = 3.0) const {
        return min_excess_eigenvalue >= -sigmas * excess_standard_error;
    }
};

/// F^-1 / M for M shots.
inline Eigen::Matrix2d cramer_rao_bound(const InterferometerConfig& cfg, std::uint64_t shots) {
    return fisher_analytic(cfg).matrix().inverse() / static_cast<double>(shots);
}

/// Replication r uses the record drawn with seed derive_seed(seed, r); the
/// reduction runs in replication order, so output depends only on the inputs.
inline EstimateResult crb_experiment(const InterferometerConfig& cfg, std::uint64_t shots,
                                     std::uint64_t replications, std::uint64_t seed) {
    if (replications < kMinReplications) throw ValidationError("replications must be >= 30");
    if (shots < 1) throw ValidationError("shots must be >= 1");

    EstimateResult out{cfg, shots, replications, seed, {}};
    out.estimates.resize(replications);
    std::vector<char> boundary(replications, 0);
    std::vector<std::optional<OptimizerError>> errors(replications);
    detail::parallel_for(replications, [&](std::size_t r) {
        try {
            const auto data = sample_scatter(cfg, shots, derive_seed(seed, r));
            const auto fit = mle(data, cfg);
            out.estimates[r] = fit.g_hat;
            boundary[r] = fit.on_boundary ? 1 : 0;
        } catch (const OptimizerError& e) {
            errors[r] = e;
        }
    });
    for (const auto& e : errors) {
        if (e) throw *e;
    }

    const double n = static_cast<double>(replications);
    for (std::size_t r = 0; r < replications; ++r) {
        out.g_hat_mean += out.estimates[r];
        out.boundary_estimates += static_cast<std::uint64_t>(boundary[r]);
    }
    out.g_hat_mean /= n;
    for (const auto& g : out.estimates) {
        const Eigen::Vector2d d = g - out.g_hat_mean;
        out.covariance_hat += d * d.transpose();
    }
    out.covariance_hat /= (n - 1.0);
    out.crb = cramer_rao_bound(cfg, shots);
    out.trace_ratio = out.covariance_hat.trace() / out.crb.trace();

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(out.covariance_hat - out.crb);
    out.min_excess_eigenvalue = eig.eigenvalues()(0);
    const Eigen::Vector2d v = eig.eigenvectors().col(0);
    // Var(v^T C v) = 2 (v^T Sigma v)^2 / (n - 1) for a Gaussian sample covariance,
    // evaluated at Sigma = CRB, the edge of the hypothesis being tested.
    out.excess_standard_error = std::sqrt(2.0 / (n - 1.0)) * v.dot(out.crb * v);
    return out;
}

}  // namespace cvlbi
