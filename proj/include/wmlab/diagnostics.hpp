#pragma once

// Finite-rank checks of the operator conditions behind equivalence of
// Whittle-Matern measures, and the closed-form verdict engine that maps
// parameter relations to (Cameron-Martin isomorphism, equivalence, optimality).

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "wmlab/errors.hpp"
#include "wmlab/fem1d.hpp"
#include "wmlab/model_config.hpp"
#include "wmlab/spectral.hpp"

namespace wmlab {

struct OperatorPair {
    SpectralDecomposition eig_A;
    SpectralDecomposition eig_At;
    Eigen::MatrixXd cross;  // W_jk = v_j^T M v~_k
};

inline OperatorPair cross_gram(const SpectralDecomposition& eig_A, const SpectralDecomposition& eig_At,
                               const Eigen::MatrixXd& M) {
    const auto n = eig_A.eigenvectors.rows();
    if (eig_At.eigenvectors.rows() != n || M.rows() != n || M.cols() != n ||
        eig_A.eigenvectors.cols() != eig_At.eigenvectors.cols())
        throw DataError("cross_gram: dimension mismatch");
    return {eig_A, eig_At, eig_A.eigenvectors.transpose() * M * eig_At.eigenvectors};
}

/// ||W^T W - I||_max; small when W is the orthogonal change of eigenbasis.
inline double cross_orthogonality_defect(const OperatorPair& pair) {
    const auto n = pair.cross.cols();
    return (pair.cross.transpose() * pair.cross - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
}

/// Pencils (K, M) and (K~, M) of a_L for two models on one basis.
inline OperatorPair operator_pair(const ModelSpec& model, const ModelSpec& model_t, const SplineBasis& basis) {
    const auto ops = assemble_aL(basis, model.a, model.kappa2);
    const auto ops_t = assemble_aL(basis, model_t.a, model_t.kappa2);
    return cross_gram(generalized_eig(ops), generalized_eig(ops_t), ops.M);
}

namespace detail {

/// G = Lambda_A^{-gamma} W Lambda_At^{gamma}, first `rows` rows; T = G G^T - c^{2 gamma} I.
inline Eigen::MatrixXd g_rows(const OperatorPair& pair, double gamma, Eigen::Index rows) {
    const Eigen::VectorXd la = pair.eig_A.eigenvalues.head(rows).array().pow(-gamma);
    const Eigen::VectorXd lt = pair.eig_At.eigenvalues.array().pow(gamma);
    return la.asDiagonal() * pair.cross.topRows(rows) * lt.asDiagonal();
}

}  // namespace detail

/// Lambda_A^{-gamma} W Lambda_At^{2 gamma} W^T Lambda_A^{-gamma} - c^{2 gamma} I in the A-eigenbasis.
inline Eigen::MatrixXd t_operator(const OperatorPair& pair, double gamma, double c, Eigen::Index rows = -1) {
    if (!(c > 0.0)) throw ParameterError("t_operator: c must be positive");
    if (rows < 0) rows = pair.cross.rows();
    const Eigen::MatrixXd G = detail::g_rows(pair, gamma, rows);
    Eigen::MatrixXd T = G * G.transpose();
    T.diagonal().array() -= std::pow(c, 2.0 * gamma);
    return symmetrized(T);
}

enum class Classification { HS_stable, compact_like, non_compact };

inline std::string_view to_string(Classification c) {
    switch (c) {
        case Classification::HS_stable: return "HS_stable";
        case Classification::compact_like: return "compact_like";
        case Classification::non_compact: return "non_compact";
    }
    return "?";
}

struct TruncationResult {
    int rank = 0;
    double frobenius = 0.0;
    double opnorm = 0.0;
    double smin = 0.0;
    double smax = 0.0;
    double tail = 0.0;  // singular value at 90% of the rank (descending order)
    std::vector<double> singular_values;  // descending
};

struct DiagnosticsReport {
    double gamma = 0.0;
    double c = 1.0;
    std::vector<TruncationResult> truncations;
    Classification classification = Classification::HS_stable;
    std::optional<std::pair<double, double>> cm_constants;
};

/// Relative Frobenius change between the last two truncations below which the curve counts as HS-stable.
inline constexpr double kHsStableChange = 0.01;
/// Tail-to-max singular value ratio below which the spectrum counts as decaying.
inline constexpr double kCompactTail = 0.1;

/// ||T||_F below this multiple of ||I_rank||_F is rounding noise (equal pencils).
inline constexpr double kNegligibleT = 1e-10;

inline Classification classify(const std::vector<TruncationResult>& t) {
    if (t.empty()) throw ParameterError("classify: no truncations");
    const auto& last = t.back();
    if (last.frobenius <= kNegligibleT * std::sqrt(static_cast<double>(last.rank))) return Classification::HS_stable;
    if (t.size() >= 2) {
        const double prev = t[t.size() - 2].frobenius;
        if (std::abs(last.frobenius - prev) < kHsStableChange * last.frobenius) return Classification::HS_stable;
    }
    if (last.tail < kCompactTail * last.smax) return Classification::compact_like;
    return Classification::non_compact;
}

inline DiagnosticsReport hs_curve(const OperatorPair& pair, double gamma, double c, const std::vector<int>& truncations) {
    const auto dof = pair.cross.rows();
    for (std::size_t i = 0; i < truncations.size(); ++i) {
        if (truncations[i] < 1 || truncations[i] > dof) throw ParameterError("hs_curve: truncation out of range");
        if (i > 0 && truncations[i] <= truncations[i - 1]) throw ParameterError("hs_curve: truncations must ascend");
    }
    DiagnosticsReport report;
    report.gamma = gamma;
    report.c = c;
    const Eigen::MatrixXd T = t_operator(pair, gamma, c, truncations.empty() ? 0 : truncations.back());
    for (int r : truncations) {
        const Eigen::MatrixXd block = T.topLeftCorner(r, r);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(block);
        const Eigen::VectorXd& s = svd.singularValues();
        TruncationResult tr;
        tr.rank = r;
        tr.frobenius = block.norm();
        tr.smax = s[0];
        tr.opnorm = s[0];
        tr.smin = s[r - 1];
        tr.tail = s[std::min<Eigen::Index>(r - 1, static_cast<Eigen::Index>(std::ceil(0.9 * r)) - 1)];
        tr.singular_values.assign(s.data(), s.data() + s.size());
        report.truncations.push_back(std::move(tr));
    }
    report.classification = classify(report.truncations);
    return report;
}

/// Extreme generalized Rayleigh quotients <A~^{2 beta} v, v> / <A^{2 beta} v, v> over
/// the span of the first `rows` A-eigenvectors.
inline std::pair<double, double> cm_equivalence_constants(const OperatorPair& pair, double beta, Eigen::Index rows = -1) {
    if (!(beta > 0.0)) throw ParameterError("cm_equivalence_constants: beta must be positive");
    if (rows < 0) rows = pair.cross.rows();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(detail::g_rows(pair, beta, rows));
    const Eigen::VectorXd& s = svd.singularValues();
    return {s[s.size() - 1] * s[s.size() - 1], s[0] * s[0]};
}

struct MeanDifferenceCurve {
    std::vector<double> partial_sums;  // S_J, J = 1..dof
    double tail_share = 0.0;           // (S_J - S_{J/2}) / S_J at J = dof
    bool converging = true;
};

/// Tail share of the final half of the partial sums below which the series counts as convergent.
inline constexpr double kMeanTailShare = 0.05;

/// S_J = sum_{j <= J} lambda_j^{2 beta} <dm, e_j>^2 with <dm, e_j> = v_j^T M dm.
inline MeanDifferenceCurve mean_difference_check(const Eigen::VectorXd& delta_m, const SpectralDecomposition& eig,
                                                 const Eigen::MatrixXd& M, double beta) {
    if (delta_m.size() != M.rows() || eig.eigenvectors.rows() != M.rows())
        throw DataError("mean_difference_check: dimension mismatch");
    const Eigen::VectorXd coef = eig.eigenvectors.transpose() * (M * delta_m);
    MeanDifferenceCurve out;
    double s = 0.0;
    for (Eigen::Index j = 0; j < coef.size(); ++j) {
        s += std::pow(eig.eigenvalues[j], 2.0 * beta) * coef[j] * coef[j];
        out.partial_sums.push_back(s);
    }
    const double last = out.partial_sums.back();
    const double half = out.partial_sums[out.partial_sums.size() / 2 - 1];
    out.tail_share = last > 0.0 ? (last - half) / last : 0.0;
    out.converging = out.tail_share < kMeanTailShare;
    return out;
}

struct FractionalBoundReport {
    std::vector<double> epsilons;
    std::vector<double> diff_norms;    // ||A_eps^alpha - A^alpha||_2
    std::vector<double> pert_norms;    // ||A_eps - A||_2
    std::vector<double> ratios;        // diff / pert^alpha
    double max_ratio = 0.0;
};

/// A_eps = A + eps (A~ - A) for eps = 1, 1/2, ..., 2^{-(levels-1)}; spectral norms of the power differences.
inline FractionalBoundReport fractional_difference_bound_check(const Eigen::MatrixXd& A, const Eigen::MatrixXd& At,
                                                               double alpha, int levels = 6) {
    if (A.rows() != A.cols() || At.rows() != A.rows() || At.cols() != A.cols())
        throw DataError("fractional_difference_bound_check: dimension mismatch");
    if (A.rows() > 1000) throw ParameterError("fractional_difference_bound_check: matrices too large");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("fractional_difference_bound_check: alpha must lie in (0,1)");
    const Eigen::MatrixXd Aa = spd_power(A, alpha);
    const Eigen::MatrixXd D = At - A;
    FractionalBoundReport out;
    double eps = 1.0;
    for (int i = 0; i < levels; ++i, eps *= 0.5) {
        const Eigen::MatrixXd Ae = symmetrized(A + eps * D);
        const double diff = Eigen::JacobiSVD<Eigen::MatrixXd>(spd_power(Ae, alpha) - Aa).singularValues()[0];
        const double pert = D.size() ? eps * Eigen::JacobiSVD<Eigen::MatrixXd>(D).singularValues()[0] : 0.0;
        out.epsilons.push_back(eps);
        out.diff_norms.push_back(diff);
        out.pert_norms.push_back(pert);
        out.ratios.push_back(pert > 0.0 ? diff / std::pow(pert, alpha) : 0.0);
        out.max_ratio = std::max(out.max_ratio, out.ratios.back());
    }
    return out;
}

// ---------------------------------------------------------------------------
// verdict engine

enum class ARelation { equal, proportional, different };

inline std::string_view to_string(ARelation r) {
    switch (r) {
        case ARelation::equal: return "equal";
        case ARelation::proportional: return "proportional";
        case ARelation::different: return "different";
    }
    return "?";
}

enum class Tristate { yes, no, unknown };

struct VerdictInput {
    int d = 1;
    double beta = 1.0;
    double beta_t = 1.0;
    ARelation a_relation = ARelation::equal;
    double c = 1.0;  // a~ = c a when proportional
    // delta_{c,kappa2} = kappa~2 - c kappa2 at the boundary: values and (normal) derivatives
    std::vector<double> delta_values;
    std::vector<double> delta_derivs;
    Tristate mean_diff_in_CM = Tristate::yes;
    // optional data for the cases that need more than the four boundary numbers
    std::optional<std::vector<double>> a_ratio_slope;  // (a~/a)' at the boundary, needed when a is "different"
    std::optional<std::vector<double>> higher_traces;  // iterated-operator traces for beta > 13/4
    std::optional<bool> kappa2_equal;                  // needed for d >= 4
    double tolerance = 1e-9;                           // |value| <= tolerance * scale counts as zero
    double scale = 1.0;
};

enum class Measures { equivalent, orthogonal };

struct Verdict {
    bool cm_equivalent = false;
    Measures measures = Measures::orthogonal;
    bool asympt_optimal = false;
    std::vector<std::string> notes;
};

inline bool in_exception_set(double beta) {
    // orders with 2 beta in {2k + 1/2}
    const double k = beta - 0.25;
    return std::abs(k - std::round(k)) < 1e-12 && std::round(k) >= 0.0;
}

inline Verdict table1_verdict(const VerdictInput& in) {
    if (in.d < 1) throw ParameterError("verdict: d must be >= 1");
    const double lower = in.d / 4.0;
    if (!(in.beta > lower) || !(in.beta_t > lower))
        throw ParameterError("verdict: beta and beta~ must exceed d/4");
    if (in.a_relation == ARelation::proportional && !(in.c > 0.0)) throw ParameterError("verdict: c must be positive");
    for (double b : {in.beta, in.beta_t})
        if (in_exception_set(b))
            throw UnsupportedError("verdict: beta = " + std::to_string(b) +
                                   " lies in the exception set {k + 1/4}; the characterization does not apply there");

    Verdict v;
    if (in.beta != in.beta_t) {
        v.notes.push_back("beta != beta~: Cameron-Martin spaces differ, measures are orthogonal");
        return v;
    }
    const double beta = in.beta;
    const double tol = in.tolerance * in.scale;
    auto all_zero = [tol](const std::vector<double>& xs) {
        return std::all_of(xs.begin(), xs.end(), [tol](double x) { return std::abs(x) <= tol; });
    };
    const bool needs_delta_bc = beta > 9.0 / 4.0;
    const bool needs_traces = beta > 13.0 / 4.0;
    if (needs_delta_bc && in.delta_derivs.empty())
        throw DataError("verdict: boundary derivatives of delta_{c,kappa2} are required for beta > 9/4");
    if (needs_traces && !in.higher_traces)
        throw DataError("verdict: insufficient boundary data, higher-order traces are required for beta > 13/4");
    const bool delta_bc = !needs_delta_bc || all_zero(in.delta_derivs);
    const bool traces_bc = !needs_traces || all_zero(*in.higher_traces);
    const bool a_prop = in.a_relation != ARelation::different;
    const double c = in.a_relation == ARelation::proportional ? in.c : 1.0;

    // Cameron-Martin isomorphism
    bool cm = true;
    if (beta > 5.0 / 4.0) {
        if (!a_prop) {
            if (!in.a_ratio_slope)
                throw DataError("verdict: (a~/a)' at the boundary is required when a is not proportional and beta > 5/4");
            if (!all_zero(*in.a_ratio_slope)) {
                cm = false;
                v.notes.push_back("(a~/a)' does not vanish at the boundary");
            }
            if (needs_delta_bc && !in.higher_traces)
                throw DataError("verdict: traces of the delta operator are required when a is not proportional and beta > 9/4");
            if (needs_delta_bc && !all_zero(*in.higher_traces)) cm = false;
        } else {
            if (!delta_bc) {
                cm = false;
                v.notes.push_back("normal derivative of delta_{c,kappa2} does not vanish at the boundary");
            }
            if (!traces_bc) {
                cm = false;
                v.notes.push_back("higher-order boundary traces do not vanish");
            }
        }
    }
    v.cm_equivalent = cm;

    // asymptotically optimal linear prediction
    v.asympt_optimal = a_prop && delta_bc && traces_bc;
    if (!a_prop) v.notes.push_back("a~ is not a constant multiple of a");

    // equivalence of measures
    bool equiv = in.a_relation == ARelation::equal && cm;
    if (in.a_relation == ARelation::proportional && c != 1.0) equiv = false;
    if (in.d >= 4) {
        if (!in.kappa2_equal) throw DataError("verdict: d >= 4 requires knowing whether kappa2 == kappa~2");
        equiv = equiv && *in.kappa2_equal;
    }
    if (equiv) {
        if (in.mean_diff_in_CM == Tristate::no) {
            equiv = false;
            v.notes.push_back("mean difference is not in the Cameron-Martin space");
        } else if (in.mean_diff_in_CM == Tristate::unknown) {
            v.notes.push_back("mean condition unknown; assumed to hold");
        }
    }
    v.measures = equiv ? Measures::equivalent : Measures::orthogonal;
    return v;
}

/// Boundary data for the verdict, computed analytically from the coefficient fields (d = 1).
inline VerdictInput verdict_input_from_models(const ModelSpec& model, const ModelSpec& model_t) {
    VerdictInput in;
    in.d = 1;
    in.beta = model.beta;
    in.beta_t = model_t.beta;
    constexpr int grid = 1001;
    double ratio0 = model_t.a.value(0.0) / model.a.value(0.0);
    bool prop = true, kequal = true;
    double kscale = 0.0;
    for (int i = 0; i < grid; ++i) {
        const double s = static_cast<double>(i) / (grid - 1);
        const double r = model_t.a.value(s) / model.a.value(s);
        if (std::abs(r - ratio0) > 1e-12 * std::abs(ratio0)) prop = false;
        const double k = model.kappa2.value(s), kt = model_t.kappa2.value(s);
        if (std::abs(k - kt) > 1e-12 * std::max(std::abs(k), std::abs(kt))) kequal = false;
        kscale = std::max({kscale, std::abs(k), std::abs(kt)});
    }
    if (!prop) {
        in.a_relation = ARelation::different;
    } else if (std::abs(ratio0 - 1.0) <= 1e-12) {
        in.a_relation = ARelation::equal;
    } else {
        in.a_relation = ARelation::proportional;
        in.c = ratio0;
    }
    const double c = in.a_relation == ARelation::proportional ? in.c : 1.0;
    for (double s : {0.0, 1.0}) {
        in.delta_values.push_back(model_t.kappa2.value(s) - c * model.kappa2.value(s));
        in.delta_derivs.push_back(model_t.kappa2.derivative(s) - c * model.kappa2.derivative(s));
    }
    if (!prop) {
        std::vector<double> slope;
        for (double s : {0.0, 1.0}) {
            const double a = model.a.value(s), at = model_t.a.value(s);
            slope.push_back((model_t.a.derivative(s) * a - at * model.a.derivative(s)) / (a * a));
        }
        in.a_ratio_slope = slope;
    }
    in.kappa2_equal = kequal;
    in.scale = std::max(1.0, kscale);
    in.mean_diff_in_CM = Tristate::yes;  // both models are centred
    return in;
}

// ---------------------------------------------------------------------------
// serialization

inline nlohmann::json to_json(const DiagnosticsReport& r) {
    nlohmann::json j;
    j["gamma"] = r.gamma;
    j["c"] = r.c;
    j["classification"] = std::string(to_string(r.classification));
    for (const auto& t : r.truncations) {
        j["truncations"].push_back({{"rank", t.rank}, {"frobenius", t.frobenius}, {"opnorm", t.opnorm},
                                    {"smin", t.smin}, {"smax", t.smax}, {"tail", t.tail}});
    }
    if (r.cm_constants) j["cm_constants"] = {{"inf_q", r.cm_constants->first}, {"sup_q", r.cm_constants->second}};
    return j;
}

inline std::string to_csv(const DiagnosticsReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << "truncation,frobenius,opnorm,smin,smax\n";
    for (const auto& t : r.truncations)
        os << t.rank << ',' << t.frobenius << ',' << t.opnorm << ',' << t.smin << ',' << t.smax << '\n';
    return os.str();
}

inline nlohmann::json to_json(const Verdict& v) {
    return {{"cm_equivalent", v.cm_equivalent},
            {"measures", v.measures == Measures::equivalent ? "equivalent" : "orthogonal"},
            {"asympt_optimal", v.asympt_optimal},
            {"notes", v.notes}};
}

inline nlohmann::json to_json(const VerdictInput& in) {
    nlohmann::json j{{"d", in.d}, {"beta", in.beta}, {"beta_t", in.beta_t},
                     {"a_relation", std::string(to_string(in.a_relation))}, {"c", in.c},
                     {"delta_values", in.delta_values}, {"delta_derivs", in.delta_derivs},
                     {"mean_diff_in_CM", in.mean_diff_in_CM == Tristate::yes  ? nlohmann::json(true)
                                         : in.mean_diff_in_CM == Tristate::no ? nlohmann::json(false)
                                                                              : nlohmann::json("unknown")},
                     {"tolerance", in.tolerance}, {"scale", in.scale}};
    if (in.a_ratio_slope) j["a_ratio_slope"] = *in.a_ratio_slope;
    if (in.higher_traces) j["higher_traces"] = *in.higher_traces;
    if (in.kappa2_equal) j["kappa2_equal"] = *in.kappa2_equal;
    return j;
}

inline VerdictInput verdict_input_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j, {"d", "beta", "beta_t", "a_relation", "c", "delta_values", "delta_derivs",
                                    "mean_diff_in_CM", "a_ratio_slope", "higher_traces", "kappa2_equal", "tolerance",
                                    "scale"},
                                "verdict input");
    VerdictInput in;
    try {
        in.d = j.value("d", 1);
        in.beta = j.at("beta").get<double>();
        in.beta_t = j.value("beta_t", in.beta);
        const std::string rel = j.value("a_relation", std::string("equal"));
        if (rel == "equal") in.a_relation = ARelation::equal;
        else if (rel == "proportional") in.a_relation = ARelation::proportional;
        else if (rel == "different") in.a_relation = ARelation::different;
        else throw ConfigError("verdict input: a_relation must be equal, proportional or different");
        in.c = j.value("c", 1.0);
        if (j.contains("delta_values")) in.delta_values = j["delta_values"].get<std::vector<double>>();
        if (j.contains("delta_derivs")) in.delta_derivs = j["delta_derivs"].get<std::vector<double>>();
        if (j.contains("mean_diff_in_CM")) {
            const auto& m = j["mean_diff_in_CM"];
            if (m.is_boolean()) in.mean_diff_in_CM = m.get<bool>() ? Tristate::yes : Tristate::no;
            else if (m == "unknown") in.mean_diff_in_CM = Tristate::unknown;
            else throw ConfigError("verdict input: mean_diff_in_CM must be true, false or \"unknown\"");
        }
        if (j.contains("a_ratio_slope")) in.a_ratio_slope = j["a_ratio_slope"].get<std::vector<double>>();
        if (j.contains("higher_traces")) in.higher_traces = j["higher_traces"].get<std::vector<double>>();
        if (j.contains("kappa2_equal")) in.kappa2_equal = j["kappa2_equal"].get<bool>();
        in.tolerance = j.value("tolerance", 1e-9);
        in.scale = j.value("scale", 1.0);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("verdict input: ") + e.what());
    }
    return in;
}

}  // namespace wmlab
