#pragma once

// Closed-form Matern covariance, the modified Bessel function K_nu and the
// Whittle variance identity. Used as the analytic reference for the Galerkin
// covariances in the interior of the domain.

#include <cmath>
#include <numbers>

#include "wmlab/errors.hpp"

namespace wmlab {

struct MaternParams {
    double nu = 0.5;
    double sigma2 = 1.0;
    double kappa = 1.0;
};

namespace detail {

/// Returns k >= 0 if nu == k + 1/2 (to 1e-12), otherwise -1.
inline int half_integer_order(double nu) {
    const double k = std::round(nu - 0.5);
    if (k >= 0.0 && k < 64.0 && std::abs(nu - 0.5 - k) < 1e-12) return static_cast<int>(k);
    return -1;
}

/// K_{k+1/2}(x) = sqrt(pi/(2x)) e^{-x} sum_{j=0}^{k} (k+j)! / (j! (k-j)!) (2x)^{-j}.
inline double bessel_k_half_integer(int k, double x) {
    double term = 1.0;
    double sum = 1.0;
    for (int j = 1; j <= k; ++j) {
        // ratio of consecutive terms: (k+j)(k-j+1) / (j * 2x)
        term *= static_cast<double>((k + j) * (k - j + 1)) / (2.0 * j * x);
        sum += term;
    }
    return std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) * sum;
}

}  // namespace detail

/// Modified Bessel function of the second kind. Half-integer orders use the
/// terminating closed form; other orders go through the standard library's
/// cylindrical Bessel K (Temme series for small argument, Steed's continued
/// fraction otherwise).
inline double bessel_k(double nu, double x) {
    if (!(x > 0.0)) throw DomainError("bessel_k: argument must be positive");
    nu = std::abs(nu);  // K_{-nu} = K_nu
    if (const int k = detail::half_integer_order(nu); k >= 0) return detail::bessel_k_half_integer(k, x);
    return std::cyl_bessel_k(nu, x);
}

/// sigma2 / (2^{nu-1} Gamma(nu)) (kappa h)^nu K_nu(kappa h), with the limit sigma2 at h = 0.
inline double matern_cov(const MaternParams& p, double h) {
    if (!(p.nu > 0.0 && p.sigma2 > 0.0 && p.kappa > 0.0)) throw ParameterError("matern_cov: parameters must be positive");
    if (h < 0.0) throw DomainError("matern_cov: negative lag");
    const double x = p.kappa * h;
    if (x == 0.0) return p.sigma2;
    if (const int k = detail::half_integer_order(p.nu); k >= 0) {
        // exp(-x) * polynomial form avoids the x^nu K_nu product for large nu
        double term = 1.0;
        double sum = 1.0;
        for (int j = 1; j <= k; ++j) {
            term *= static_cast<double>((k + j) * (k - j + 1)) / (2.0 * j * x);
            sum += term;
        }
        // (x)^{k+1/2} sqrt(pi/(2x)) = sqrt(pi/2) x^k
        const double log_prefactor = -(p.nu - 1.0) * std::numbers::ln2 - std::lgamma(p.nu) + 0.5 * std::log(std::numbers::pi / 2.0);
        return p.sigma2 * std::exp(log_prefactor + k * std::log(x) - x) * sum;
    }
    const double log_val = -(p.nu - 1.0) * std::numbers::ln2 - std::lgamma(p.nu) + p.nu * std::log(x);
    return p.sigma2 * std::exp(log_val) * bessel_k(p.nu, x);
}

/// Marginal variance of the stationary Whittle-Matern field on R^d:
/// (4 pi)^{-d/2} kappa^{-2 nu} Gamma(nu) / Gamma(nu + d/2).
inline double whittle_variance(double nu, double kappa, int d) {
    if (!(nu > 0.0 && kappa > 0.0) || d < 1) throw ParameterError("whittle_variance: need nu > 0, kappa > 0, d >= 1");
    const double half_d = 0.5 * d;
    return std::exp(-half_d * std::log(4.0 * std::numbers::pi) - 2.0 * nu * std::log(kappa) + std::lgamma(nu) -
                    std::lgamma(nu + half_d));
}

}  // namespace wmlab
