#pragma once

// Whittle's identity check: for constant coefficients the Galerkin field at
// the domain centre should follow a Matern covariance with nu = 2 beta - 1/2.

#include <cmath>
#include <vector>

#include "wmlab/errors.hpp"
#include "wmlab/fem1d.hpp"
#include "wmlab/matern.hpp"
#include "wmlab/model_config.hpp"
#include "wmlab/spectral.hpp"

namespace wmlab {

struct MaternComparison {
    std::vector<double> offsets;
    std::vector<double> fem;
    std::vector<double> reference;
    std::vector<double> rel_error;
    double max_rel_error = 0.0;
};

/// Matern covariance implied by a constant-coefficient model on R:
/// L = a (kappa2/a - d^2/ds^2) gives tau^2 a^{-2 beta} times the Whittle-Matern kernel.
inline MaternParams implied_matern(const ModelSpec& model) {
    if (!model.a.is_constant() || !model.kappa2.is_constant())
        throw UnsupportedError("compare_fem_vs_matern: coefficients must be constant");
    const double a = model.a.value(0.5);
    const double kappa = std::sqrt(model.kappa2.value(0.5) / a);
    const double nu = 2.0 * model.beta - 0.5;
    return {nu, model.tau * model.tau * std::pow(a, -2.0 * model.beta) * whittle_variance(nu, kappa, 1), kappa};
}

inline MaternComparison compare_fem_vs_matern(const ModelSpec& model, const CovarianceMatrix& cov,
                                              const SplineBasis& basis, const std::vector<double>& offsets,
                                              double centre = 0.5) {
    const MaternParams p = implied_matern(model);
    MaternComparison out;
    for (double h : offsets) {
        const double fem = field_covariance_at(cov, basis, centre, centre + h);
        const double ref = matern_cov(p, std::abs(h));
        out.offsets.push_back(h);
        out.fem.push_back(fem);
        out.reference.push_back(ref);
        out.rel_error.push_back(std::abs(fem - ref) / ref);
        out.max_rel_error = std::max(out.max_rel_error, out.rel_error.back());
    }
    return out;
}

inline MaternComparison compare_fem_vs_matern(const ModelSpec& model, int N, const std::vector<double>& offsets) {
    const SplineBasis basis = basis_for(model, N);
    return compare_fem_vs_matern(model, build_covariance(model, basis), basis, offsets);
}

}  // namespace wmlab
