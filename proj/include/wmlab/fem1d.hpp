#pragma once

// B-spline Galerkin discretization on (0,1): clamped uniform B-splines of
// degree 1..3, recombined at the end points so that every basis function
// vanishes there (and, optionally, so does its second derivative), plus
// assembly of the mass matrix, the a_L form and the higher-order forms for
// L^2 and L^3.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wmlab/errors.hpp"
#include "wmlab/model_config.hpp"
#include "wmlab/quadrature.hpp"

namespace wmlab {

enum class ConstraintMode { dirichlet, dirichlet_plus_laplace_zero };

/// Highest derivative order any assembled form needs (u''' in the L^3 form).
inline constexpr int kMaxDerivative = 3;

/// Values and derivatives of the basis functions supported on one element.
struct LocalBasis {
    int element = 0;
    std::vector<int> dofs;  // global dof indices with support on the element
    // ders[k][i]: k-th derivative of local function i
    std::array<std::vector<double>, kMaxDerivative + 1> ders;
};

class SplineBasis {
public:
    /// Builds a basis with exactly N retained dofs.
    SplineBasis(int N, int order, ConstraintMode mode) : order_(order), mode_(mode) {
        if (order < 1 || order > 3) throw ConstraintError("spline order must be 1, 2 or 3");
        if (N < 10) throw ConstraintError("basis needs N >= 10");
        if (mode == ConstraintMode::dirichlet_plus_laplace_zero && order < 3)
            throw ConstraintError(
                "second-derivative end constraint needs cubic splines (lower orders have no pointwise second derivative)");
        const int removed = mode == ConstraintMode::dirichlet ? 2 : 4;
        n_cells_ = N + removed - order;
        n_unconstrained_ = n_cells_ + order;
        h_ = 1.0 / n_cells_;
        const int p = order_;
        knots_.assign(n_unconstrained_ + p + 1, 0.0);
        for (int i = 1; i < n_cells_; ++i) knots_[p + i] = static_cast<double>(i) / n_cells_;
        for (int i = n_cells_ + p; i < static_cast<int>(knots_.size()); ++i) knots_[i] = 1.0;
        build_constraints();
        n_dof_ = N;
    }

    [[nodiscard]] int order() const { return order_; }
    [[nodiscard]] int n_dof() const { return n_dof_; }
    [[nodiscard]] int n_cells() const { return n_cells_; }
    [[nodiscard]] int n_unconstrained() const { return n_unconstrained_; }
    [[nodiscard]] double h() const { return h_; }
    [[nodiscard]] ConstraintMode constraint_mode() const { return mode_; }
    [[nodiscard]] const std::vector<double>& knots() const { return knots_; }

    [[nodiscard]] int element_of(double s) const {
        return std::clamp(static_cast<int>(std::floor(s * n_cells_)), 0, n_cells_ - 1);
    }

    /// Derivatives 0..n_ders of the p+1 unconstrained B-splines B_e .. B_{e+p}
    /// nonzero on element e, at s (Piegl & Tiller, algorithm A2.3).
    [[nodiscard]] std::array<std::array<double, 4>, kMaxDerivative + 1> unconstrained_ders(int e, double s) const {
        const int p = order_;
        const int span = e + p;
        std::array<std::array<double, 4>, 4> ndu{};
        std::array<double, 4> left{}, right{};
        ndu[0][0] = 1.0;
        for (int j = 1; j <= p; ++j) {
            left[j] = s - knots_[span + 1 - j];
            right[j] = knots_[span + j] - s;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                ndu[j][r] = right[r + 1] + left[j - r];
                const double tmp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            ndu[j][j] = saved;
        }
        std::array<std::array<double, 4>, kMaxDerivative + 1> ders{};
        for (int j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];
        std::array<std::array<double, 4>, 2> a{};
        for (int r = 0; r <= p; ++r) {
            int s1 = 0, s2 = 1;
            a[0] = {};
            a[1] = {};
            a[0][0] = 1.0;
            for (int k = 1; k <= std::min(p, kMaxDerivative); ++k) {
                double d = 0.0;
                const int rk = r - k, pk = p - k;
                if (r >= k) {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                    d = a[s2][0] * ndu[rk][pk];
                }
                const int j1 = rk >= -1 ? 1 : -rk;
                const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
                for (int j = j1; j <= j2; ++j) {
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                    d += a[s2][j] * ndu[rk + j][pk];
                }
                if (r <= pk) {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::swap(s1, s2);
            }
        }
        double fac = p;
        for (int k = 1; k <= std::min(p, kMaxDerivative); ++k) {
            for (int j = 0; j <= p; ++j) ders[k][j] *= fac;
            fac *= (p - k);
        }
        return ders;
    }

    /// Constrained basis functions supported on element e, evaluated at s.
    [[nodiscard]] LocalBasis local(int e, double s) const {
        const auto raw = unconstrained_ders(e, s);
        const ElementMap& map = element_maps_[e];
        LocalBasis out;
        out.element = e;
        out.dofs = map.dofs;
        const std::size_t n = map.dofs.size();
        for (int k = 0; k <= kMaxDerivative; ++k) {
            out.ders[k].assign(n, 0.0);
            for (std::size_t d = 0; d < n; ++d)
                for (int i = 0; i <= order_; ++i) out.ders[k][d] += map.coeff[d][i] * raw[k][i];
        }
        return out;
    }

    /// Dense vector of all constrained basis values (or derivatives) at s in [0,1].
    [[nodiscard]] Eigen::VectorXd evaluate(double s, int derivative = 0) const {
        if (!(s >= 0.0 && s <= 1.0)) throw DomainError("basis evaluation outside [0,1]");
        Eigen::VectorXd v = Eigen::VectorXd::Zero(n_dof_);
        const auto loc = local(element_of(s), s);
        for (std::size_t d = 0; d < loc.dofs.size(); ++d) v[loc.dofs[d]] = loc.ders[derivative][d];
        return v;
    }

    /// Sum of all unconstrained B-splines at s (partition of unity before recombination).
    [[nodiscard]] double unconstrained_sum(double s) const {
        const auto raw = unconstrained_ders(element_of(s), s);
        double sum = 0.0;
        for (int i = 0; i <= order_; ++i) sum += raw[0][i];
        return sum;
    }

private:
    struct ElementMap {
        std::vector<int> dofs;
        std::vector<std::array<double, 4>> coeff;  // coeff[d][i]: weight of B_{e+i} in dof d
    };

    void build_constraints() {
        const int p = order_;
        const int n = n_unconstrained_;
        // expansion of each retained function in unconstrained B-splines
        std::vector<std::vector<std::pair<int, double>>> functions;
        if (mode_ == ConstraintMode::dirichlet) {
            // only B_0 and B_{n-1} are nonzero at the end points of a clamped knot vector
            for (int i = 1; i < n - 1; ++i) functions.push_back({{i, 1.0}});
        } else {
            // B_0 carries the end value; B_1 and B_2 have nonzero second derivative at 0.
            const auto d0 = unconstrained_ders(0, 0.0);
            const double alpha_left = -d0[2][1] / d0[2][2];
            const auto d1 = unconstrained_ders(n_cells_ - 1, 1.0);
            // local indices on the last element: B_{n-4} .. B_{n-1} -> 0..3
            const double alpha_right = -d1[2][p - 1] / d1[2][p - 2];
            functions.push_back({{1, 1.0}, {2, alpha_left}});
            for (int i = 3; i < n - 3; ++i) functions.push_back({{i, 1.0}});
            functions.push_back({{n - 2, 1.0}, {n - 3, alpha_right}});
        }
        element_maps_.assign(n_cells_, {});
        for (int dof = 0; dof < static_cast<int>(functions.size()); ++dof) {
            for (int e = 0; e < n_cells_; ++e) {
                std::array<double, 4> c{};
                bool touches = false;
                for (const auto& [idx, w] : functions[dof]) {
                    if (idx >= e && idx <= e + p) {
                        c[idx - e] += w;
                        touches = true;
                    }
                }
                if (touches) {
                    element_maps_[e].dofs.push_back(dof);
                    element_maps_[e].coeff.push_back(c);
                }
            }
        }
    }

    int order_;
    ConstraintMode mode_;
    int n_cells_ = 0;
    int n_unconstrained_ = 0;
    int n_dof_ = 0;
    double h_ = 0.0;
    std::vector<double> knots_;
    std::vector<ElementMap> element_maps_;
};

/// Basis with N dofs.
inline SplineBasis build_basis(int N, int order, ConstraintMode mode) { return SplineBasis(N, order, mode); }

enum class FormOrder { mass, a_L, a_2, a_3 };

struct AssembledOperators {
    Eigen::MatrixXd M;
    Eigen::MatrixXd K;
    FormOrder form_order = FormOrder::a_L;
};

namespace detail {

/// One term coef(s) * u^(du) * v^(dv) of a bilinear form.
struct FormTerm {
    int du;
    int dv;
};

/// Accumulates sum_t int coef_t(s) phi_k^(du_t) phi_j^(dv_t) ds into K(j, k), element by element.
template <class CoefFn>
Eigen::MatrixXd assemble_terms(const SplineBasis& basis, const std::vector<FormTerm>& terms, int nq, CoefFn&& coefs) {
    const int N = basis.n_dof();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(N, N);
    const QuadratureRule& rule = gauss_legendre(nq);
    const double h = basis.h();
    std::vector<double> c(terms.size());
    for (int e = 0; e < basis.n_cells(); ++e) {
        const double s0 = e * h;
        for (int q = 0; q < nq; ++q) {
            const double s = s0 + 0.5 * h * (rule.nodes[q] + 1.0);
            const double w = 0.5 * h * rule.weights[q];
            const LocalBasis loc = basis.local(e, s);
            coefs(s, c);
            const std::size_t n = loc.dofs.size();
            for (std::size_t t = 0; t < terms.size(); ++t) {
                if (c[t] == 0.0) continue;
                const auto& du = loc.ders[terms[t].du];
                const auto& dv = loc.ders[terms[t].dv];
                const double wc = w * c[t];
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t k = 0; k < n; ++k) K(loc.dofs[j], loc.dofs[k]) += wc * du[k] * dv[j];
            }
        }
    }
    return K;
}

inline int default_nodes(const SplineBasis& b, int extra) { return b.order() + extra; }

inline void require_unit_diffusion(const CoefficientField& a, const char* form) {
    if (!(a.is_constant() && a.value(0.0) == 1.0))
        throw UnsupportedError(std::string(form) + " form is only stated for a = 1");
}

}  // namespace detail

/// M_jk = int phi_j phi_k (default p + 2 Gauss nodes per element, exact for degree 2p + 3).
inline Eigen::MatrixXd mass_matrix(const SplineBasis& basis, int nq = 0) {
    if (nq <= 0) nq = detail::default_nodes(basis, 2);
    return detail::assemble_terms(basis, {{0, 0}}, nq, [](double, std::vector<double>& c) { c[0] = 1.0; });
}

/// K_jk = int a phi_j' phi_k' + kappa^2 phi_j phi_k.
inline AssembledOperators assemble_aL(const SplineBasis& basis, const CoefficientField& a,
                                      const CoefficientField& kappa2, int nq = 0) {
    if (nq <= 0) nq = detail::default_nodes(basis, 3);
    AssembledOperators ops;
    ops.form_order = FormOrder::a_L;
    ops.M = mass_matrix(basis);
    ops.K = detail::assemble_terms(basis, {{1, 1}, {0, 0}}, nq, [&](double s, std::vector<double>& c) {
        c[0] = a.value(s);
        c[1] = kappa2.value(s);
        if (!(c[0] > 0.0)) throw CoefficientError("non-positive a at quadrature node s = " + std::to_string(s));
        if (!(c[1] >= 0.0)) throw CoefficientError("negative kappa^2 at quadrature node s = " + std::to_string(s));
    });
    return ops;
}

/// Form of L^2 for a = 1:
/// <k4 u, v> + 2 <k2 u', v'> + <g u, v'> + <g u', v> + <u'', v''>, with k2 = kappa^2, g = (kappa^2)'.
inline AssembledOperators assemble_a2(const SplineBasis& basis, const CoefficientField& a,
                                      const CoefficientField& kappa2, int nq = 0) {
    if (basis.order() < 2) throw ConstraintError("the L^2 form needs splines of order >= 2");
    detail::require_unit_diffusion(a, "L^2");
    if (nq <= 0) nq = detail::default_nodes(basis, 4);
    AssembledOperators ops;
    ops.form_order = FormOrder::a_2;
    ops.M = mass_matrix(basis);
    const std::vector<detail::FormTerm> terms{{0, 0}, {1, 1}, {0, 1}, {1, 0}, {2, 2}};
    ops.K = detail::assemble_terms(basis, terms, nq, [&](double s, std::vector<double>& c) {
        const double k2 = kappa2.value(s);
        const double g = kappa2.derivative(s);  // 2 kappa kappa'
        if (!(k2 > 0.0)) throw CoefficientError("non-positive kappa^2 at quadrature node s = " + std::to_string(s));
        c[0] = k2 * k2;
        c[1] = 2.0 * k2;
        c[2] = g;
        c[3] = g;
        c[4] = 1.0;
    });
    return ops;
}

/// Form of L^3 for a = 1 (twelve terms), with k2 = kappa^2 and g = (kappa^2)' = 2 kappa kappa':
///   <(k2^3 + g^2) u, v> + <k2 g u, v'> + <k2 g u', v> + <k2^2 u', v'> - <k2^2 u'', v> - <k2^2 u, v''>
///   + <k2 u'', v''> - <g u''', v> - <g u, v'''> - <k2 u''', v'> - <k2 u', v'''> + <u''', v'''>.
/// Requires cubic splines whose value and second derivative vanish at both ends.
inline AssembledOperators assemble_a3(const SplineBasis& basis, const CoefficientField& kappa2, int nq = 0) {
    if (basis.order() != 3 || basis.constraint_mode() != ConstraintMode::dirichlet_plus_laplace_zero)
        throw ConstraintError("the L^3 form needs cubic splines with u = u'' = 0 at both ends");
    if (nq <= 0) nq = detail::default_nodes(basis, 6);
    AssembledOperators ops;
    ops.form_order = FormOrder::a_3;
    ops.M = mass_matrix(basis);
    // (du, dv) pairs; trial function u = phi_k, test v = phi_j
    const std::vector<detail::FormTerm> terms{{0, 0}, {0, 1}, {1, 0}, {1, 1}, {2, 0}, {0, 2},
                                              {2, 2}, {3, 0}, {0, 3}, {3, 1}, {1, 3}, {3, 3}};
    ops.K = detail::assemble_terms(basis, terms, nq, [&](double s, std::vector<double>& c) {
        const double k2 = kappa2.value(s);
        const double g = kappa2.derivative(s);
        if (!(k2 > 0.0)) throw CoefficientError("non-positive kappa^2 at quadrature node s = " + std::to_string(s));
        c[0] = k2 * k2 * k2 + g * g;
        c[1] = k2 * g;
        c[2] = k2 * g;
        c[3] = k2 * k2;
        c[4] = -k2 * k2;
        c[5] = -k2 * k2;
        c[6] = k2;
        c[7] = -g;
        c[8] = -g;
        c[9] = -k2;
        c[10] = -k2;
        c[11] = 1.0;
    });
    return ops;
}

/// Form of L^j for j = 1, 2, 3 from a model's coefficients.
inline AssembledOperators assemble_power(const SplineBasis& basis, const ModelSpec& m, int power) {
    switch (power) {
        case 1: return assemble_aL(basis, m.a, m.kappa2);
        case 2: return assemble_a2(basis, m.a, m.kappa2);
        case 3:
            detail::require_unit_diffusion(m.a, "L^3");
            return assemble_a3(basis, m.kappa2);
        default: throw ParameterError("assemble_power: power must be 1, 2 or 3");
    }
}

/// Phi_lk = int sqrt(2) sin(l pi s) phi_k(s) ds for l = 1..n_rows.
inline Eigen::MatrixXd integral_obs_matrix(const SplineBasis& basis, int n_rows, int nq = 0) {
    if (n_rows < 1 || n_rows > basis.n_dof()) throw ParameterError("integral_obs_matrix: need 1 <= n_rows <= n_dof");
    const double h = basis.h();
    if (nq <= 0) nq = std::max(basis.order() + 2, static_cast<int>(std::ceil(4.0 * n_rows * h)) + 2);
    const QuadratureRule& rule = gauss_legendre(nq);
    Eigen::MatrixXd Phi = Eigen::MatrixXd::Zero(n_rows, basis.n_dof());
    Eigen::VectorXd sines(n_rows);
    for (int e = 0; e < basis.n_cells(); ++e) {
        for (int q = 0; q < nq; ++q) {
            const double s = e * h + 0.5 * h * (rule.nodes[q] + 1.0);
            const double w = 0.5 * h * rule.weights[q] * std::numbers::sqrt2;
            for (int l = 0; l < n_rows; ++l) sines[l] = w * std::sin((l + 1) * std::numbers::pi * s);
            const LocalBasis loc = basis.local(e, s);
            for (std::size_t d = 0; d < loc.dofs.size(); ++d) Phi.col(loc.dofs[d]) += loc.ders[0][d] * sines;
        }
    }
    return Phi;
}

/// Phi_lk = phi_k(s_l) for locations strictly inside (0,1).
inline Eigen::MatrixXd point_obs_matrix(const SplineBasis& basis, const std::vector<double>& locations) {
    Eigen::MatrixXd Phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(locations.size()), basis.n_dof());
    for (std::size_t l = 0; l < locations.size(); ++l) {
        const double s = locations[l];
        if (!(s > 0.0 && s < 1.0)) throw DomainError("point observation at s = " + std::to_string(s) + " outside (0,1)");
        const LocalBasis loc = basis.local(basis.element_of(s), s);
        for (std::size_t d = 0; d < loc.dofs.size(); ++d) Phi(static_cast<Eigen::Index>(l), loc.dofs[d]) = loc.ders[0][d];
    }
    return Phi;
}

/// Coefficients of the interpolant (P1) or Galerkin L2 projection (higher orders) of g.
template <class Fn>
Eigen::VectorXd project(const SplineBasis& basis, Fn&& g) {
    if (basis.order() == 1) {
        Eigen::VectorXd c(basis.n_dof());
        for (int k = 0; k < basis.n_dof(); ++k) c[k] = g((k + 1) * basis.h());
        return c;
    }
    const int nq = basis.order() + 6;
    const QuadratureRule& rule = gauss_legendre(nq);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(basis.n_dof());
    for (int e = 0; e < basis.n_cells(); ++e)
        for (int q = 0; q < nq; ++q) {
            const double s = e * basis.h() + 0.5 * basis.h() * (rule.nodes[q] + 1.0);
            const double w = 0.5 * basis.h() * rule.weights[q];
            const LocalBasis loc = basis.local(e, s);
            for (std::size_t d = 0; d < loc.dofs.size(); ++d) rhs[loc.dofs[d]] += w * g(s) * loc.ders[0][d];
        }
    return mass_matrix(basis).llt().solve(rhs);
}

/// Relative Frobenius asymmetry ||A - A^T||_F / ||A||_F.
inline double asymmetry(const Eigen::MatrixXd& A) {
    const double n = A.norm();
    return n == 0.0 ? 0.0 : (A - A.transpose()).norm() / n;
}

}  // namespace wmlab
