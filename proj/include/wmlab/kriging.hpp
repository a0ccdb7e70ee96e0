#pragma once

// Best linear prediction of observables under the true and a misspecified
// covariance model: error variances, the efficiency ratio E_n(h) and the
// E^max curves of the integral- and point-observation designs.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wmlab/errors.hpp"
#include "wmlab/fem1d.hpp"
#include "wmlab/model_config.hpp"
#include "wmlab/spectral.hpp"

namespace wmlab {

/// Condition estimate above which an (n, target) pair is flagged.
inline constexpr double kConditionFlag = 1e12;
/// Targets whose optimal error variance is below this fraction of their
/// variance are excluded from E^max (no positive prediction error).
inline constexpr double kDegenerateTarget = 1e-14;

/// Phi C Phi^T, symmetrized. Uses the stored factor (Phi F)(Phi F)^T when present.
inline Eigen::MatrixXd sigma_matrix(const Eigen::MatrixXd& Phi, const CovarianceMatrix& cov) {
    if (Phi.cols() != cov.C.rows()) throw DataError("sigma_matrix: Phi has " + std::to_string(Phi.cols()) +
                                                    " columns, covariance has " + std::to_string(cov.C.rows()) + " rows");
    if (cov.factor.size() > 0) {
        const Eigen::MatrixXd G = Phi * cov.factor;
        return symmetrized(G * G.transpose());
    }
    return symmetrized(Phi * cov.C * Phi.transpose());
}

inline Eigen::MatrixXd sigma_matrix(const Eigen::MatrixXd& Phi, const Eigen::MatrixXd& C) {
    if (Phi.cols() != C.rows()) throw DataError("sigma_matrix: dimension mismatch");
    return symmetrized(Phi * C * Phi.transpose());
}

struct TargetPrediction {
    int target = 0;
    double true_var = 0.0;   // E[(h_n - h)^2]
    double missp_var = 0.0;  // E[(h~_n - h)^2], expectation under the true model
    std::optional<double> efficiency;  // empty for degenerate targets
};

/// Kriging with the first n rows of Sigma as observations.
///
/// Observations and targets are rescaled by the true standard deviations
/// before factoring; kriging weights and the efficiency ratio are invariant
/// under this, and it keeps the factorizations accurate when the observation
/// variances span many orders of magnitude (integral observables of smooth
/// fields). The efficiency is evaluated as (w~ - w)^T Sigma_nn (w~ - w) / E_true,
/// which equals the ratio of error variances minus one.
class KrigingProblem {
public:
    KrigingProblem(const Eigen::MatrixXd& Sigma, const Eigen::MatrixXd& SigmaTilde, int n)
        : Sigma_(Sigma), SigmaTilde_(SigmaTilde), n_(n) {
        if (Sigma.rows() != Sigma.cols() || SigmaTilde.rows() != Sigma.rows() || SigmaTilde.cols() != Sigma.cols())
            throw DataError("kriging: Sigma and SigmaTilde must be square and of equal size");
        if (n < 1 || n >= Sigma.rows()) throw DataError("kriging: need 1 <= n < rows(Sigma)");
        scale_.resize(n);
        for (int i = 0; i < n; ++i) {
            if (!(Sigma(i, i) > 0.0))
                throw ConditioningError("kriging: observation " + std::to_string(i) + " has zero variance", INFINITY);
            scale_[i] = 1.0 / std::sqrt(Sigma(i, i));
        }
        S_ = scale_.asDiagonal() * Sigma.topLeftCorner(n, n) * scale_.asDiagonal();
        St_ = scale_.asDiagonal() * SigmaTilde.topLeftCorner(n, n) * scale_.asDiagonal();
        S_ = symmetrized(S_);
        St_ = symmetrized(St_);
        llt_.compute(S_);
        if (llt_.info() != Eigen::Success) throw ConditioningError("kriging: leading block of Sigma is singular", INFINITY);
        llt_tilde_.compute(St_);
        if (llt_tilde_.info() != Eigen::Success)
            throw ConditioningError("kriging: leading block of SigmaTilde is singular", INFINITY);
        condition_ = std::max(1.0 / llt_.rcond(), 1.0 / llt_tilde_.rcond());
    }

    [[nodiscard]] double condition_estimate() const { return condition_; }
    [[nodiscard]] bool flagged() const { return condition_ > kConditionFlag; }

    [[nodiscard]] std::vector<TargetPrediction> predict(const std::vector<int>& targets) const {
        const auto m = static_cast<Eigen::Index>(targets.size());
        Eigen::MatrixXd P(n_, m), Pt(n_, m);
        Eigen::VectorXd tscale(m);
        for (Eigen::Index j = 0; j < m; ++j) {
            const int t = targets[j];
            if (t < n_ || t >= Sigma_.rows()) throw DataError("kriging: target row must be an unobserved row");
            const double v = Sigma_(t, t);
            tscale[j] = v > 0.0 ? 1.0 / std::sqrt(v) : 0.0;
            P.col(j) = scale_.cwiseProduct(Sigma_.col(t).head(n_)) * tscale[j];
            Pt.col(j) = scale_.cwiseProduct(SigmaTilde_.col(t).head(n_)) * tscale[j];
        }
        const Eigen::MatrixXd W = llt_.solve(P);
        const Eigen::MatrixXd Wt = llt_tilde_.solve(Pt);
        const Eigen::MatrixXd D = Wt - W;
        const Eigen::MatrixXd SD = S_ * D;
        const Eigen::MatrixXd SWt = S_ * Wt;
        std::vector<TargetPrediction> out(targets.size());
        for (Eigen::Index j = 0; j < m; ++j) {
            const double var = Sigma_(targets[j], targets[j]);
            TargetPrediction& r = out[j];
            r.target = targets[j];
            if (tscale[j] == 0.0) {  // zero-variance target: trivially predicted
                r.true_var = r.missp_var = 0.0;
                continue;
            }
            const double true_scaled = 1.0 - P.col(j).dot(W.col(j));
            const double missp_scaled = 1.0 + Wt.col(j).dot(SWt.col(j)) - 2.0 * P.col(j).dot(Wt.col(j));
            const double excess = D.col(j).dot(SD.col(j));
            r.true_var = true_scaled * var;
            r.missp_var = missp_scaled * var;
            if (true_scaled > kDegenerateTarget) r.efficiency = excess / true_scaled;
        }
        return out;
    }

private:
    const Eigen::MatrixXd& Sigma_;
    const Eigen::MatrixXd& SigmaTilde_;
    int n_;
    Eigen::VectorXd scale_;
    Eigen::MatrixXd S_, St_;
    Eigen::LLT<Eigen::MatrixXd> llt_, llt_tilde_;
    double condition_ = 1.0;
};

/// Sigma_tt - Sigma_{t,1:n} Sigma_{1:n,1:n}^{-1} Sigma_{t,1:n}^T. Rows 0..n-1 are the
/// observations; target is a 0-based row index >= n.
inline double correct_error_variance(const Eigen::MatrixXd& Sigma, int n, int target) {
    return KrigingProblem(Sigma, Sigma, n).predict({target})[0].true_var;
}

/// Error variance, under Sigma, of the predictor built from SigmaTilde:
/// Sigma_tt + s~^T S~^{-1} S S~^{-1} s~ - 2 s^T S~^{-1} s~.
inline double misspecified_error_variance(const Eigen::MatrixXd& Sigma, const Eigen::MatrixXd& SigmaTilde, int n,
                                          int target) {
    return KrigingProblem(Sigma, SigmaTilde, n).predict({target})[0].missp_var;
}

/// E_n(h) = E[(h~_n - h)^2] / E[(h_n - h)^2] - 1; empty when the optimal error is zero.
inline std::optional<double> efficiency(const Eigen::MatrixXd& Sigma, const Eigen::MatrixXd& SigmaTilde, int n,
                                        int target) {
    return KrigingProblem(Sigma, SigmaTilde, n).predict({target})[0].efficiency;
}

enum class DesignKind { integral, point };

/// Point layout s_{2j-1} = s0 - j delta, s_{2j} = s0 + j delta. With `infill`
/// the spacing shrinks with n, delta(n) = radius / ceil(n/2), so the n points
/// always fill [s0 - radius, s0 + radius]; otherwise delta = delta_o for all n.
struct ObservationDesign {
    DesignKind kind = DesignKind::integral;
    double s0 = 0.5;
    double delta_o = 0.01;
    bool infill = false;
    double radius = 0.1;

    [[nodiscard]] double spacing(int n) const { return infill ? radius / ((n + 1) / 2) : delta_o; }

    [[nodiscard]] std::vector<double> point_locations(int n) const {
        const double d = spacing(n);
        std::vector<double> s(static_cast<std::size_t>(n));
        for (int i = 1; i <= n; ++i) {
            const int j = (i + 1) / 2;
            s[i - 1] = i % 2 == 1 ? s0 - j * d : s0 + j * d;
        }
        return s;
    }

    /// Throws DomainError unless every location for every n lies in (0,1).
    void validate_points(const std::vector<int>& n_values) const {
        if (!(s0 > 0.0 && s0 < 1.0)) throw DomainError("point design: s0 must lie in (0,1)");
        if (infill ? !(radius > 0.0) : !(delta_o > 0.0)) throw ParameterError("point design: spacing must be positive");
        for (int n : n_values) {
            if (n < 1) throw ParameterError("point design: n must be >= 1");
            for (double s : point_locations(n))
                if (!(s > 0.0 && s < 1.0))
                    throw DomainError("point design: location " + std::to_string(s) + " outside (0,1) at n = " +
                                      std::to_string(n));
        }
    }
};

struct CurveRow {
    int n = 0;
    int target = 0;
    double true_var = 0.0;
    double missp_var = 0.0;
    double efficiency = 0.0;
};

struct EfficiencyCurve {
    std::vector<int> n_values;
    std::vector<double> e_max;
    std::vector<int> argmax_target;  // row index of the maximizing target
    std::vector<double> argmax_true_var;
    std::vector<double> argmax_missp_var;
    std::vector<double> condition;  // largest condition estimate of the two leading blocks
    std::vector<bool> flagged;
    std::vector<CurveRow> per_target;  // filled on request
};

/// E^max over the given targets for each n; targets(n) lists the rows predicted at n.
template <class TargetsFn>
EfficiencyCurve efficiency_curve(const Eigen::MatrixXd& Sigma, const Eigen::MatrixXd& SigmaTilde,
                                 const std::vector<int>& n_values, TargetsFn&& targets, bool keep_per_target = false) {
    EfficiencyCurve curve;
    curve.n_values = n_values;
    for (int n : n_values) {
        std::optional<KrigingProblem> problem;
        try {
            problem.emplace(Sigma, SigmaTilde, n);
        } catch (const ConditioningError& e) {
            throw ConditioningError(e.message + " at n = " + std::to_string(n), e.condition);
        }
        const auto preds = problem->predict(targets(n));
        double best = -std::numeric_limits<double>::infinity();
        const TargetPrediction* arg = nullptr;
        for (const auto& p : preds) {
            if (!p.efficiency) continue;
            if (keep_per_target) curve.per_target.push_back({n, p.target, p.true_var, p.missp_var, *p.efficiency});
            if (*p.efficiency > best) {
                best = *p.efficiency;
                arg = &p;
            }
        }
        if (!arg) throw NumericalError("efficiency curve: no non-degenerate target at n = " + std::to_string(n));
        curve.e_max.push_back(best);
        curve.argmax_target.push_back(arg->target);
        curve.argmax_true_var.push_back(arg->true_var);
        curve.argmax_missp_var.push_back(arg->missp_var);
        curve.condition.push_back(problem->condition_estimate());
        curve.flagged.push_back(problem->flagged());
    }
    return curve;
}

/// Observation and target covariances of the integral design (rows l = 1..N of
/// int sqrt(2) sin(l pi s) Z(s) ds) under both models, on the true model's basis.
struct SigmaPair {
    Eigen::MatrixXd Sigma;
    Eigen::MatrixXd SigmaTilde;
};

inline SigmaPair integral_sigma_pair(const ModelSpec& true_model, const ModelSpec& missp_model, int N) {
    const SplineBasis basis = basis_for(true_model, N);
    const Eigen::MatrixXd Phi = integral_obs_matrix(basis, N);
    return {sigma_matrix(Phi, build_covariance(true_model, basis)), sigma_matrix(Phi, build_covariance(missp_model, basis))};
}

/// Integral design: observe I_1..I_n, predict I_l for l = n+1..N, record the maximum efficiency.
inline EfficiencyCurve efficiency_curve_integral(const SigmaPair& sigmas, const std::vector<int>& n_values,
                                                 bool keep_per_target = false) {
    const int N = static_cast<int>(sigmas.Sigma.rows());
    for (int n : n_values)
        if (n < 1 || 2 * n > N) throw ParameterError("integral design: need 1 <= n <= N/2, got n = " + std::to_string(n));
    return efficiency_curve(sigmas.Sigma, sigmas.SigmaTilde, n_values, [N](int n) {
        std::vector<int> t;
        for (int l = n; l < N; ++l) t.push_back(l);
        return t;
    }, keep_per_target);
}

inline EfficiencyCurve efficiency_curve_integral(const ModelSpec& true_model, const ModelSpec& missp_model, int N,
                                                 const std::vector<int>& n_values, bool keep_per_target = false) {
    for (int n : n_values)
        if (n < 1 || 2 * n > N) throw ParameterError("integral design: need 1 <= n <= N/2, got n = " + std::to_string(n));
    return efficiency_curve_integral(integral_sigma_pair(true_model, missp_model, N), n_values, keep_per_target);
}

/// Point design: observe Z at design.point_locations(n), predict Z(s0).
/// Fixed-spacing designs are nested and share one covariance; infill designs
/// get a fresh observation matrix per n.
inline EfficiencyCurve efficiency_curve_point(const ModelSpec& true_model, const ModelSpec& missp_model,
                                              const ObservationDesign& design, const std::vector<int>& n_values,
                                              int N = 1000) {
    if (n_values.empty()) throw ParameterError("point design: empty n grid");
    design.validate_points(n_values);
    const SplineBasis basis = basis_for(true_model, N);
    const CovarianceMatrix cov = build_covariance(true_model, basis);
    const CovarianceMatrix cov_t = build_covariance(missp_model, basis);
    auto sigmas_for = [&](int count) {
        auto locations = design.point_locations(count);
        locations.push_back(design.s0);
        const Eigen::MatrixXd Phi = point_obs_matrix(basis, locations);
        return SigmaPair{sigma_matrix(Phi, cov), sigma_matrix(Phi, cov_t)};
    };
    if (!design.infill) {
        const SigmaPair sp = sigmas_for(*std::max_element(n_values.begin(), n_values.end()));
        const int target = static_cast<int>(sp.Sigma.rows()) - 1;
        return efficiency_curve(sp.Sigma, sp.SigmaTilde, n_values, [target](int) { return std::vector<int>{target}; });
    }
    EfficiencyCurve curve;
    for (int n : n_values) {
        const SigmaPair sp = sigmas_for(n);
        const EfficiencyCurve one = efficiency_curve(sp.Sigma, sp.SigmaTilde, {n}, [n](int) { return std::vector<int>{n}; });
        curve.n_values.push_back(n);
        curve.e_max.push_back(one.e_max[0]);
        curve.argmax_target.push_back(one.argmax_target[0]);
        curve.argmax_true_var.push_back(one.argmax_true_var[0]);
        curve.argmax_missp_var.push_back(one.argmax_missp_var[0]);
        curve.condition.push_back(one.condition[0]);
        curve.flagged.push_back(one.flagged[0]);
    }
    return curve;
}

inline EfficiencyCurve efficiency_curve_point(const ModelSpec& true_model, const ModelSpec& missp_model, double s0,
                                              double delta_o, const std::vector<int>& n_values, int N = 1000) {
    return efficiency_curve_point(true_model, missp_model, ObservationDesign{DesignKind::point, s0, delta_o, false},
                                  n_values, N);
}

/// Uniform asymptotic optimality as read off a curve: E^max falls by at least
/// `factor` between the first and the last n of the grid.
inline bool curve_indicates_optimal(const EfficiencyCurve& curve, double factor = 10.0) {
    return !curve.e_max.empty() && curve.e_max.back() * factor <= curve.e_max.front();
}

}  // namespace wmlab
