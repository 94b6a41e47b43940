#pragma once

// Linear-algebra substrate for zero-mean Gaussian states.
//
// Conventions used throughout the library:
//   * vacuum covariance is the identity (one unit per quadrature variance);
//   * full orderings are xp-interleaved per mode: (x_m0, p_m0, x_m1, p_m1, ...);
//   * the symplectic form is the direct sum of [[0, 1], [-1, 0]] blocks in that
//     ordering, and a state is physical iff V + i*Omega >= 0.
// Every reordering goes through a Permutation built from labels; call sites
// never do index arithmetic on quadratures.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cvlbi/errors.hpp"

namespace cvlbi {

using Eigen::Index;

inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kSymplecticTolerance = 1e-9;
inline constexpr double kPhysicalityThreshold = -1e-9;
inline constexpr double kMaxConditionNumber = 1e12;

enum class Quadrature { x, p };

struct QuadratureLabel {
    std::string mode;
    Quadrature quadrature = Quadrature::x;

    [[nodiscard]] std::string str() const {
        return (quadrature == Quadrature::x ? "x_" : "p_") + mode;
    }

    friend bool operator==(const QuadratureLabel&, const QuadratureLabel&) = default;
};

inline QuadratureLabel x_of(std::string mode) { return {std::move(mode), Quadrature::x}; }
inline QuadratureLabel p_of(std::string mode) { return {std::move(mode), Quadrature::p}; }

/// Parses "x_A1" / "p_B2" style labels.
inline QuadratureLabel parse_label(std::string_view text) {
    if (text.size() < 3 || text[1] != '_' || (text[0] != 'x' && text[0] != 'p')) {
        throw ValidationError("malformed quadrature label '" + std::string(text) + "'");
    }
    return {std::string(text.substr(2)), text[0] == 'x' ? Quadrature::x : Quadrature::p};
}

/// Ordered list of quadrature labels indexing the rows of a covariance matrix.
///
/// A full ordering lists every mode as an adjacent (x, p) pair. A reduced
/// ordering is any selection of unique labels, typically what is left after
/// choosing which quadratures get measured.
class QuadratureOrdering {
public:
    QuadratureOrdering() = default;

    QuadratureOrdering(std::vector<QuadratureLabel> labels, bool reduced)
        : labels_(std::move(labels)), reduced_(reduced) {
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            for (std::size_t j = i + 1; j < labels_.size(); ++j) {
                if (labels_[i] == labels_[j]) {
                    throw ValidationError("duplicate quadrature label " + labels_[i].str());
                }
            }
        }
        if (!reduced_) {
            if (labels_.size() % 2 != 0) {
                throw ValidationError("full ordering must have an even number of labels");
            }
            for (std::size_t k = 0; k < labels_.size(); k += 2) {
                const auto& lx = labels_[k];
                const auto& lp = labels_[k + 1];
                if (lx.quadrature != Quadrature::x || lp.quadrature != Quadrature::p ||
                    lx.mode != lp.mode) {
                    throw ValidationError("full ordering must be xp-interleaved per mode (at " +
                                          lx.str() + ")");
                }
            }
        }
    }

    /// Full xp-interleaved ordering over the given modes.
    static QuadratureOrdering of_modes(const std::vector<std::string>& modes) {
        std::vector<QuadratureLabel> labels;
        labels.reserve(2 * modes.size());
        for (const auto& m : modes) {
            labels.push_back(x_of(m));
            labels.push_back(p_of(m));
        }
        return {std::move(labels), false};
    }

    static QuadratureOrdering reduced_from(std::vector<QuadratureLabel> labels) {
        return {std::move(labels), true};
    }

    [[nodiscard]] Index size() const { return static_cast<Index>(labels_.size()); }
    [[nodiscard]] bool is_reduced() const { return reduced_; }
    [[nodiscard]] const std::vector<QuadratureLabel>& labels() const { return labels_; }
    [[nodiscard]] const QuadratureLabel& operator[](Index i) const {
        return labels_[static_cast<std::size_t>(i)];
    }

    [[nodiscard]] std::optional<Index> index_of(const QuadratureLabel& label) const {
        auto it = std::find(labels_.begin(), labels_.end(), label);
        if (it == labels_.end()) return std::nullopt;
        return static_cast<Index>(it - labels_.begin());
    }

    [[nodiscard]] std::vector<std::string> mode_names() const {
        std::vector<std::string> out;
        for (const auto& l : labels_) {
            if (std::find(out.begin(), out.end(), l.mode) == out.end()) out.push_back(l.mode);
        }
        return out;
    }

    [[nodiscard]] std::string str() const {
        std::ostringstream os;
        os << '(';
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            os << (i ? ", " : "") << labels_[i].str();
        }
        os << ')';
        return os.str();
    }

    friend bool operator==(const QuadratureOrdering&, const QuadratureOrdering&) = default;

private:
    std::vector<QuadratureLabel> labels_;
    bool reduced_ = false;
};

/// Index map between two orderings over the same label set:
/// row i of the target is row source_index()[i] of the source.
class Permutation {
public:
    static Permutation between(const QuadratureOrdering& from, const QuadratureOrdering& to) {
        if (from.size() != to.size()) {
            throw ValidationError("target ordering " + to.str() + " is not a permutation of " +
                                  from.str());
        }
        std::vector<Index> idx;
        idx.reserve(static_cast<std::size_t>(to.size()));
        for (const auto& label : to.labels()) {
            auto i = from.index_of(label);
            if (!i) {
                throw ValidationError("target ordering " + to.str() +
                                      " is not a permutation of " + from.str());
            }
            idx.push_back(*i);
        }
        return Permutation(std::move(idx));
    }

    [[nodiscard]] const std::vector<Index>& source_index() const { return index_; }
    [[nodiscard]] Index size() const { return static_cast<Index>(index_.size()); }

    /// P with (P v)_i = v_{source_index[i]}.
    [[nodiscard]] Eigen::MatrixXd matrix() const {
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(size(), size());
        for (Index i = 0; i < size(); ++i) p(i, index_[static_cast<std::size_t>(i)]) = 1.0;
        return p;
    }

    /// P M P^T, computed by index gathering so the result is exact.
    [[nodiscard]] Eigen::MatrixXd conjugate(const Eigen::MatrixXd& m) const {
        Eigen::MatrixXd out(size(), size());
        for (Index i = 0; i < size(); ++i) {
            for (Index j = 0; j < size(); ++j) {
                out(i, j) = m(index_[static_cast<std::size_t>(i)], index_[static_cast<std::size_t>(j)]);
            }
        }
        return out;
    }

    [[nodiscard]] Permutation inverse() const {
        std::vector<Index> inv(index_.size());
        for (std::size_t i = 0; i < index_.size(); ++i) {
            inv[static_cast<std::size_t>(index_[i])] = static_cast<Index>(i);
        }
        return Permutation(std::move(inv));
    }

private:
    explicit Permutation(std::vector<Index> idx) : index_(std::move(idx)) {}
    std::vector<Index> index_;
};

/// Symmetric real matrix of quadrature second moments, tagged with its ordering.
class CovarianceMatrix {
public:
    CovarianceMatrix(QuadratureOrdering ordering, Eigen::MatrixXd entries)
        : ordering_(std::move(ordering)), entries_(std::move(entries)) {
        if (entries_.rows() != entries_.cols() || entries_.rows() != ordering_.size()) {
            throw ValidationError("covariance matrix dimension does not match ordering " +
                                  ordering_.str());
        }
        if (!entries_.allFinite()) throw ValidationError("covariance matrix has non-finite entries");
        const double asym = (entries_ - entries_.transpose()).cwiseAbs().maxCoeff();
        if (asym > kSymmetryTolerance) {
            std::ostringstream os;
            os << "covariance matrix is not symmetric (max |V - V^T| = " << asym << ")";
            throw ValidationError(os.str());
        }
    }

    [[nodiscard]] const QuadratureOrdering& ordering() const { return ordering_; }
    [[nodiscard]] const Eigen::MatrixXd& matrix() const { return entries_; }
    [[nodiscard]] Index dim() const { return entries_.rows(); }
    [[nodiscard]] double operator()(Index i, Index j) const { return entries_(i, j); }

    [[nodiscard]] double at(const QuadratureLabel& row, const QuadratureLabel& col) const {
        auto i = ordering_.index_of(row);
        auto j = ordering_.index_of(col);
        if (!i || !j) throw ValidationError("unknown quadrature label");
        return entries_(*i, *j);
    }

private:
    QuadratureOrdering ordering_;
    Eigen::MatrixXd entries_;
};

/// Omega for `modes` modes in xp-interleaved ordering.
inline Eigen::MatrixXd symplectic_form(Index modes) {
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * modes, 2 * modes);
    for (Index k = 0; k < modes; ++k) {
        omega(2 * k, 2 * k + 1) = 1.0;
        omega(2 * k + 1, 2 * k) = -1.0;
    }
    return omega;
}

/// Block-diagonal (A, B) matrix with n = (A.rows + B.rows).
inline Eigen::MatrixXd block_diagonal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    out.topLeftCorner(a.rows(), a.cols()) = a;
    out.bottomRightCorner(b.rows(), b.cols()) = b;
    return out;
}

/// Covariance of a product state.
inline CovarianceMatrix direct_sum(const CovarianceMatrix& v1, const CovarianceMatrix& v2) {
    if (v1.ordering().is_reduced() || v2.ordering().is_reduced()) {
        throw ValidationError("direct_sum requires full orderings");
    }
    const auto other = v2.ordering().mode_names();
    for (const auto& m : v1.ordering().mode_names()) {
        if (std::find(other.begin(), other.end(), m) != other.end()) {
            throw ValidationError("direct_sum: mode name '" + m + "' appears in both operands");
        }
    }
    std::vector<QuadratureLabel> labels = v1.ordering().labels();
    labels.insert(labels.end(), v2.ordering().labels().begin(), v2.ordering().labels().end());
    return {QuadratureOrdering(std::move(labels), false), block_diagonal(v1.matrix(), v2.matrix())};
}

inline CovarianceMatrix permute_modes(const CovarianceMatrix& v, const QuadratureOrdering& target) {
    const auto perm = Permutation::between(v.ordering(), target);
    return {target, perm.conjugate(v.matrix())};
}

/// ||S Omega S^T - Omega||_max, the symplectic residual of S.
inline double symplectic_residual(const Eigen::MatrixXd& s) {
    if (s.rows() != s.cols() || s.rows() % 2 != 0) return std::numeric_limits<double>::infinity();
    const auto omega = symplectic_form(s.rows() / 2);
    return (s * omega * s.transpose() - omega).cwiseAbs().maxCoeff();
}

/// V -> S V S^T for a symplectic S acting in v's ordering.
inline CovarianceMatrix apply_symplectic(const CovarianceMatrix& v, const Eigen::MatrixXd& s) {
    if (v.ordering().is_reduced()) {
        throw ValidationError("apply_symplectic requires a full ordering");
    }
    if (s.rows() != v.dim() || s.cols() != v.dim()) {
        throw ValidationError("apply_symplectic: transform dimension does not match state");
    }
    const double residual = symplectic_residual(s);
    if (!(residual <= kSymplecticTolerance)) {
        std::ostringstream os;
        os << "apply_symplectic: transform is not symplectic (||S Omega S^T - Omega|| = "
           << residual << ")";
        throw ValidationError(os.str());
    }
    Eigen::MatrixXd out = s * v.matrix() * s.transpose();
    // Exact symmetry; the product is only symmetric up to rounding.
    out = 0.5 * (out + out.transpose()).eval();
    return {v.ordering(), std::move(out)};
}

namespace detail {

// Pade coefficients b_0..b_m for exp, degrees 3, 5, 7, 9, 13.
inline constexpr std::array<double, 4> kPade3{120.0, 60.0, 12.0, 1.0};
inline constexpr std::array<double, 6> kPade5{30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
inline constexpr std::array<double, 8> kPade7{17297280.0, 8648640.0, 1995840.0, 277200.0,
                                              25200.0,    1512.0,    56.0,      1.0};
inline constexpr std::array<double, 10> kPade9{17643225600.0, 8821612800.0, 2075673600.0,
                                               302702400.0,   30270240.0,   2162160.0,
                                               110880.0,      3960.0,       90.0,
                                               1.0};
inline constexpr std::array<double, 14> kPade13{
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};

// Largest 1-norm for which degree m keeps backward error below unit roundoff.
inline constexpr std::array<double, 4> kPadeTheta{1.495585217958292e-2, 2.539398330063230e-1,
                                                  9.504178996162932e-1, 2.097847961257068};
inline constexpr double kPadeTheta13 = 5.371920351148152;

template <std::size_t N>
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> pade_uv_low(const Eigen::MatrixXd& a,
                                                        const std::array<double, N>& b) {
    const Index n = a.rows();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd a2 = a * a;
    Eigen::MatrixXd even = b[0] * id;
    Eigen::MatrixXd odd = b[1] * id;
    Eigen::MatrixXd power = id;
    for (std::size_t k = 2; k + 1 < N; k += 2) {
        power = power * a2;
        even += b[k] * power;
        odd += b[k + 1] * power;
    }
    return {a * odd, even};
}

inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> pade_uv13(const Eigen::MatrixXd& a) {
    const auto& b = kPade13;
    const Index n = a.rows();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd a2 = a * a;
    const Eigen::MatrixXd a4 = a2 * a2;
    const Eigen::MatrixXd a6 = a4 * a2;
    const Eigen::MatrixXd u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2);
    const Eigen::MatrixXd u =
        a * (u_inner + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
    const Eigen::MatrixXd v_inner = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2);
    const Eigen::MatrixXd v = v_inner + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
    return {u, v};
}

}  // namespace detail

/// exp(m) by scaling and squaring with a diagonal Pade approximant whose
/// degree is picked from the 1-norm of m.
inline Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw ValidationError("matrix_exponential: matrix is not square");
    if (!m.allFinite()) throw ValidationError("matrix_exponential: non-finite entries");
    const Index n = m.rows();
    if (n == 0) return m;

    const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
    std::pair<Eigen::MatrixXd, Eigen::MatrixXd> uv;
    int squarings = 0;
    if (norm1 <= detail::kPadeTheta[0]) {
        uv = detail::pade_uv_low(m, detail::kPade3);
    } else if (norm1 <= detail::kPadeTheta[1]) {
        uv = detail::pade_uv_low(m, detail::kPade5);
    } else if (norm1 <= detail::kPadeTheta[2]) {
        uv = detail::pade_uv_low(m, detail::kPade7);
    } else if (norm1 <= detail::kPadeTheta[3]) {
        uv = detail::pade_uv_low(m, detail::kPade9);
    } else {
        squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / detail::kPadeTheta13))));
        uv = detail::pade_uv13(m / std::ldexp(1.0, squarings));
    }
    const auto& [u, v] = uv;
    Eigen::MatrixXd result = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < squarings; ++k) result = result * result;
    return result;
}

/// Principal submatrix over `keep`, in that order. The result is marked reduced.
inline CovarianceMatrix reduce(const CovarianceMatrix& v, const std::vector<QuadratureLabel>& keep) {
    std::vector<Index> idx;
    idx.reserve(keep.size());
    for (const auto& label : keep) {
        auto i = v.ordering().index_of(label);
        if (!i) {
            throw ValidationError("reduce: unknown label " + label.str() + " in " +
                                  v.ordering().str());
        }
        idx.push_back(*i);
    }
    const auto n = static_cast<Index>(idx.size());
    Eigen::MatrixXd out(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            out(i, j) = v(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
    }
    return {QuadratureOrdering::reduced_from(keep), std::move(out)};
}

/// Cholesky factorization of a covariance used as an outcome distribution,
/// after rejecting singular or badly conditioned matrices.
inline Eigen::LLT<Eigen::MatrixXd> outcome_factorization(const Eigen::MatrixXd& v) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(v, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kMaxConditionNumber) {
        std::ostringstream os;
        os << "outcome covariance is singular or ill-conditioned (eigenvalues in [" << lo << ", "
           << hi << "])";
        throw NumericalError(os.str());
    }
    Eigen::LLT<Eigen::MatrixXd> llt(v);
    if (llt.info() != Eigen::Success) throw NumericalError("Cholesky factorization failed");
    return llt;
}

inline double log_determinant(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

/// log of the zero-mean normal density
///   P(x) = exp(-x^T V^{-1} x / 2) / sqrt((2 pi)^d det V),  d = dim(x).
inline double gaussian_log_pdf(const Eigen::MatrixXd& v, const Eigen::VectorXd& x) {
    if (x.size() != v.rows()) throw ValidationError("gaussian_log_pdf: dimension mismatch");
    const auto llt = outcome_factorization(v);
    const Eigen::VectorXd w = llt.matrixL().solve(x);
    const double d = static_cast<double>(x.size());
    return -0.5 * w.squaredNorm() - 0.5 * (d * std::log(2.0 * std::numbers::pi) + log_determinant(llt));
}

inline double gaussian_log_pdf(const CovarianceMatrix& v, const Eigen::VectorXd& x) {
    return gaussian_log_pdf(v.matrix(), x);
}

struct PhysicalityReport {
    double min_eigenvalue = 0.0;
    bool physical = false;
};

/// Smallest eigenvalue of the Hermitian matrix V + i*Omega.
inline PhysicalityReport check_physicality(const CovarianceMatrix& v) {
    if (v.ordering().is_reduced()) {
        throw ValidationError("check_physicality requires a full ordering");
    }
    const Eigen::MatrixXcd h =
        v.matrix().cast<std::complex<double>>() +
        std::complex<double>(0.0, 1.0) * symplectic_form(v.dim() / 2).cast<std::complex<double>>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    return {lo, lo >= kPhysicalityThreshold};
}

}  // namespace cvlbi
