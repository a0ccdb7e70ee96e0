#pragma once

// Generalized eigenpairs of Galerkin pencils, Whittle-Matern covariance
// matrices of the basis weights, the sinc-quadrature route to negative
// fractional powers, and seeded Gaussian sampling.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "wmlab/errors.hpp"
#include "wmlab/fem1d.hpp"
#include "wmlab/model_config.hpp"

namespace wmlab {

/// Solutions of K v = lambda M v; eigenvalues ascending, V^T M V = I.
struct SpectralDecomposition {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;
};

/// Covariance of the basis weights. `factor` F satisfies C = F F^T and is kept
/// so that observation covariances can be formed as (Phi F)(Phi F)^T, which keeps
/// the small diagonal entries of high-frequency observables accurate.
struct CovarianceMatrix {
    Eigen::MatrixXd C;
    Eigen::MatrixXd factor;
    double beta = 1.0;
    double tau = 1.0;
};

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& A) { return 0.5 * (A + A.transpose()); }

/// Cholesky reduction M = R R^T, symmetric eigensolve of R^{-1} K R^{-T}, back-substitution.
inline SpectralDecomposition generalized_eig(const Eigen::MatrixXd& K, const Eigen::MatrixXd& M) {
    if (K.rows() != M.rows() || K.cols() != M.cols() || K.rows() != K.cols())
        throw DataError("generalized_eig: K and M must be square and of equal size");
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) throw NumericalError("generalized_eig: mass matrix is not positive definite");
    const auto L = llt.matrixL();
    const Eigen::MatrixXd LK = L.solve(K);
    const Eigen::MatrixXd A = L.solve(LK.transpose());  // K symmetric: (L^{-1} K)^T = K L^{-T}
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(A));
    if (es.info() != Eigen::Success) throw NumericalError("generalized_eig: symmetric eigensolver failed");
    SpectralDecomposition out;
    out.eigenvalues = es.eigenvalues();
    out.eigenvectors = llt.matrixU().solve(es.eigenvectors());
    if (out.eigenvalues.size() > 0 && !(out.eigenvalues[0] > 0.0))
        throw NumericalError("generalized_eig: pencil is not positive definite (lambda_1 = " +
                             std::to_string(out.eigenvalues[0]) + ")");
    return out;
}

inline SpectralDecomposition generalized_eig(const AssembledOperators& ops) { return generalized_eig(ops.K, ops.M); }

/// C = tau^2 V diag(lambda^{-2 beta}) V^T. Any beta > 0 is accepted here; the
/// field-level requirement beta > 1/4 is enforced by validate_model.
inline CovarianceMatrix covariance_weights(const SpectralDecomposition& eig, double beta, double tau) {
    if (!(beta >= 0.0)) throw ParameterError("covariance_weights: beta must be non-negative");
    CovarianceMatrix out;
    out.beta = beta;
    out.tau = tau;
    const Eigen::VectorXd scale = (-beta * eig.eigenvalues.array().log()).exp() * tau;
    out.factor = eig.eigenvectors * scale.asDiagonal();
    out.C = symmetrized(out.factor * out.factor.transpose());
    return out;
}

/// C = tau^2 K^{-1} M K^{-1}: the weight covariance when K is the Galerkin form
/// of L^beta (beta = 1 for a_L, 2 and 3 for the higher-order forms).
inline CovarianceMatrix covariance_direct(const AssembledOperators& ops, double tau, double beta) {
    Eigen::LLT<Eigen::MatrixXd> kfac(ops.K);
    if (kfac.info() != Eigen::Success) throw NumericalError("covariance: stiffness form is not positive definite");
    Eigen::LLT<Eigen::MatrixXd> mfac(ops.M);
    if (mfac.info() != Eigen::Success) throw NumericalError("covariance: mass matrix is not positive definite");
    CovarianceMatrix out;
    out.beta = beta;
    out.tau = tau;
    out.factor = kfac.solve(Eigen::MatrixXd(mfac.matrixL())) * tau;
    out.C = symmetrized(out.factor * out.factor.transpose());
    return out;
}

inline CovarianceMatrix covariance_beta1_direct(const AssembledOperators& ops, double tau) {
    return covariance_direct(ops, tau, 1.0);
}

/// Weight covariance of a model on a given basis. Integer beta in {1,2,3} with
/// basis order >= beta uses the matching Galerkin form directly; every other
/// case uses the spectral route on the a_L pencil.
inline CovarianceMatrix build_covariance(const ModelSpec& model, const SplineBasis& basis) {
    const double rb = std::round(model.beta);
    const bool integer_beta = std::abs(model.beta - rb) < 1e-12 && rb >= 1.0 && rb <= 3.0;
    const int power = static_cast<int>(rb);
    if (integer_beta && basis.order() >= power &&
        (power < 3 || basis.constraint_mode() == ConstraintMode::dirichlet_plus_laplace_zero))
        return covariance_direct(assemble_power(basis, model, power), model.tau, model.beta);
    return covariance_weights(generalized_eig(assemble_aL(basis, model.a, model.kappa2)), model.beta, model.tau);
}

/// The basis a model is discretized on: its own spline order, with the
/// second-derivative end constraint exactly when the L^3 form is used.
inline SplineBasis basis_for(const ModelSpec& model, int N) {
    const bool cubic_form = model.basis_order == 3 && std::abs(model.beta - 3.0) < 1e-12;
    return SplineBasis(N, model.basis_order,
                       cubic_form ? ConstraintMode::dirichlet_plus_laplace_zero : ConstraintMode::dirichlet);
}

/// A^{-theta} for SPD A by the Balakrishnan integral
///   A^{-theta} = sin(pi theta)/pi int_R e^{(1-theta) y} (e^y I + A)^{-1} dy,
/// discretized with the trapezoidal (sinc) rule of step k = 2 pi / sqrt(levels).
/// The integrand extends analytically to the strip |Im y| < pi, so the step
/// error is O(exp(-2 pi^2 / k)) = O(exp(-pi sqrt(levels))); the truncation
/// points are placed so that both tails match it. The spectrum is bracketed
/// without an eigensolve: 1/||A^{-1}||_F <= lambda_min, lambda_max <= ||A||_inf.
inline Eigen::MatrixXd balakrishnan_fractional_inverse(const Eigen::MatrixXd& A, double theta, int levels) {
    if (!(theta > 0.0 && theta < 1.0)) throw ParameterError("balakrishnan: theta must lie in (0,1)");
    if (levels < 1) throw ParameterError("balakrishnan: levels must be positive");
    const Eigen::Index n = A.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw NumericalError("balakrishnan: matrix is not positive definite");
    const double lo = 1.0 / llt.solve(I).norm();
    const double hi = A.cwiseAbs().rowwise().sum().maxCoeff();
    const Eigen::MatrixXd B = A / lo;  // spectrum in [1, hi/lo]
    const double k = 2.0 * std::numbers::pi / std::sqrt(static_cast<double>(levels));
    const double exponent = 2.0 * std::numbers::pi * std::numbers::pi / k;  // -log of the step error
    const auto m_minus = static_cast<long>(std::ceil(exponent / ((1.0 - theta) * k)));
    const auto m_plus = static_cast<long>(std::ceil((exponent / theta + std::log(std::max(hi / lo, 1.0))) / k));
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
    for (long m = -m_minus; m <= m_plus; ++m) {
        const double y = m * k;
        Eigen::LLT<Eigen::MatrixXd> res(B + std::exp(y) * I);
        sum += std::exp((1.0 - theta) * y) * res.solve(I);
    }
    return symmetrized(sum) * (k * std::sin(std::numbers::pi * theta) / std::numbers::pi * std::pow(lo, -theta));
}

/// V diag(lambda^p) V^T for a symmetric positive definite matrix.
inline Eigen::MatrixXd spd_power(const Eigen::MatrixXd& A, double p) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(A));
    const Eigen::VectorXd d = es.eigenvalues().array().max(0.0).pow(p);
    return symmetrized(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose());
}

// ---------------------------------------------------------------------------
// Sampling

/// Counter-based generator "splitmix64-ctr": the k-th 64-bit word of stream j
/// under seed s is splitmix64_mix(key + (k + 1) * 0x9E3779B97F4A7C15) with
/// key = splitmix64_mix(s ^ splitmix64_mix(j + 0x9E3779B97F4A7C15)), where
/// splitmix64_mix(z) applies z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
/// z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31.
/// Normals come from Box-Muller on consecutive word pairs, both outputs used.
class CounterRng {
public:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
    static constexpr const char* kName = "splitmix64-ctr";

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed ^ mix(stream + kGolden))) {}

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGolden); }

    /// Uniform on (0, 1].
    double next_uniform() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Square-root factor F with C = F F^T from the eigendecomposition of C;
/// eigenvalues in [-1e-10 ||C||, 0) are clipped to zero.
inline Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& C) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(C));
    const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
    if (es.eigenvalues().size() > 0 && es.eigenvalues()[0] < -1e-10 * norm)
        throw NumericalError("covariance is indefinite (smallest eigenvalue " + std::to_string(es.eigenvalues()[0]) + ")");
    const Eigen::VectorXd root = es.eigenvalues().array().max(0.0).sqrt();
    return es.eigenvectors() * root.asDiagonal();
}

/// Columns are independent draws z = F xi with xi from stream j = column index.
inline Eigen::MatrixXd sample_field(const CovarianceMatrix& cov, std::uint64_t seed, int n_samples) {
    if (n_samples < 0) throw ParameterError("sample_field: negative sample count");
    const Eigen::MatrixXd F = psd_factor(cov.C);
    const Eigen::Index n = F.cols();
    Eigen::MatrixXd xi(n, n_samples);
    for (int j = 0; j < n_samples; ++j) {
        CounterRng rng(seed, static_cast<std::uint64_t>(j));
        for (Eigen::Index i = 0; i < n; ++i) xi(i, j) = rng.next_normal();
    }
    return F * xi;
}

/// phi(s)^T C phi(t); zero on the boundary (all basis functions vanish there).
inline double field_covariance_at(const CovarianceMatrix& cov, const SplineBasis& basis, double s, double t) {
    if (!(s >= 0.0 && s <= 1.0 && t >= 0.0 && t <= 1.0)) throw DomainError("field_covariance_at: outside [0,1]");
    if (s == 0.0 || s == 1.0 || t == 0.0 || t == 1.0) return 0.0;
    const Eigen::VectorXd ps = basis.evaluate(s);
    const Eigen::VectorXd pt = basis.evaluate(t);
    // symmetric sum so that value(s,t) == value(t,s) bit for bit
    return 0.5 * (ps.dot(cov.C * pt) + pt.dot(cov.C * ps));
}

}  // namespace wmlab
