#pragma once

// Coefficient fields a(.) and kappa^2(.) on [0,1], model parameter sets for
// the fractional SPDE (kappa^2 - (a u')')^beta (tau Z) = W, and the built-in
// true / misspecified models of the two simulation studies.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wmlab/errors.hpp"
#include "wmlab/matern.hpp"

namespace wmlab {

/// Error function. Backed by the C library's erf (correctly rounded to within
/// a few ulp on glibc).
inline double erf(double x) { return std::erf(x); }

enum class FieldKind { constant, polynomial, sigmoid_reciprocal, sigmoid_scaled, tabulated };

/// Scalar coefficient on [0,1].
///
/// Parameter layout per kind:
///  - constant:           {value}
///  - polynomial:         coefficients in ascending degree
///  - sigmoid_scaled:     {base, amplitude, steepness, center};
///                        base * (1 + amplitude * erf(steepness (s - center) / sqrt(2)))
///  - sigmoid_reciprocal: same layout; base / (1 + amplitude * erf(...))
///  - tabulated:          values at `knots`, piecewise linear in between
struct CoefficientField {
    FieldKind kind = FieldKind::constant;
    std::vector<double> params{1.0};
    std::vector<double> knots{};

    static CoefficientField constant(double value) { return {FieldKind::constant, {value}, {}}; }
    static CoefficientField polynomial(std::vector<double> ascending) {
        return {FieldKind::polynomial, std::move(ascending), {}};
    }
    static CoefficientField sigmoid_scaled(double base, double amplitude, double steepness, double center) {
        return {FieldKind::sigmoid_scaled, {base, amplitude, steepness, center}, {}};
    }
    static CoefficientField sigmoid_reciprocal(double base, double amplitude, double steepness, double center) {
        return {FieldKind::sigmoid_reciprocal, {base, amplitude, steepness, center}, {}};
    }
    static CoefficientField tabulated(std::vector<double> knots, std::vector<double> values) {
        return {FieldKind::tabulated, std::move(values), std::move(knots)};
    }

    [[nodiscard]] bool is_constant() const {
        if (kind == FieldKind::constant) return true;
        if (kind == FieldKind::polynomial)
            return std::all_of(params.begin() + std::min<std::ptrdiff_t>(1, std::ssize(params)), params.end(),
                               [](double c) { return c == 0.0; });
        return false;
    }

    /// Value at s without the domain check (quadrature nodes are always inside).
    [[nodiscard]] double value(double s) const {
        switch (kind) {
            case FieldKind::constant:
                return params[0];
            case FieldKind::polynomial: {
                double v = 0.0;
                for (auto it = params.rbegin(); it != params.rend(); ++it) v = v * s + *it;
                return v;
            }
            case FieldKind::sigmoid_scaled:
                return params[0] * sigmoid(s);
            case FieldKind::sigmoid_reciprocal:
                return params[0] / sigmoid(s);
            case FieldKind::tabulated: {
                const auto [i, t] = locate(s);
                return (1.0 - t) * params[i] + t * params[i + 1];
            }
        }
        return 0.0;
    }

    /// Analytic first derivative (one-sided from the right at interior knots of tabulated fields).
    [[nodiscard]] double derivative(double s) const {
        switch (kind) {
            case FieldKind::constant:
                return 0.0;
            case FieldKind::polynomial: {
                double v = 0.0;
                for (std::size_t k = params.size(); k-- > 1;) v = v * s + static_cast<double>(k) * params[k];
                return v;
            }
            case FieldKind::sigmoid_scaled:
                return params[0] * sigmoid_derivative(s);
            case FieldKind::sigmoid_reciprocal: {
                const double f = sigmoid(s);
                return -params[0] * sigmoid_derivative(s) / (f * f);
            }
            case FieldKind::tabulated: {
                const auto [i, t] = locate(s);
                return (params[i + 1] - params[i]) / (knots[i + 1] - knots[i]);
            }
        }
        return 0.0;
    }

    /// Returns a copy multiplied by c.
    [[nodiscard]] CoefficientField scaled(double c) const {
        CoefficientField out = *this;
        switch (kind) {
            case FieldKind::constant:
            case FieldKind::polynomial:
            case FieldKind::tabulated:
                for (double& p : out.params) p *= c;
                break;
            case FieldKind::sigmoid_scaled:
            case FieldKind::sigmoid_reciprocal:
                out.params[0] *= c;
                break;
        }
        return out;
    }

private:
    [[nodiscard]] double sigmoid(double s) const {
        return 1.0 + params[1] * std::erf(params[2] * (s - params[3]) / std::numbers::sqrt2);
    }
    [[nodiscard]] double sigmoid_derivative(double s) const {
        const double z = params[2] * (s - params[3]) / std::numbers::sqrt2;
        return params[1] * 2.0 * std::numbers::inv_sqrtpi * std::exp(-z * z) * params[2] / std::numbers::sqrt2;
    }
    [[nodiscard]] std::pair<std::size_t, double> locate(double s) const {
        const auto it = std::upper_bound(knots.begin(), knots.end(), s);
        std::size_t i = it == knots.begin() ? 0 : static_cast<std::size_t>(it - knots.begin()) - 1;
        i = std::min(i, knots.size() - 2);
        return {i, (s - knots[i]) / (knots[i + 1] - knots[i])};
    }
};

/// Checks the parameter layout of a field; throws ParameterError.
inline void validate_field(const CoefficientField& f, std::string_view name) {
    const auto fail = [&](const std::string& why) { throw ParameterError(std::string(name) + ": " + why); };
    switch (f.kind) {
        case FieldKind::constant:
            if (f.params.size() != 1) fail("constant field needs exactly one parameter");
            break;
        case FieldKind::polynomial:
            if (f.params.empty()) fail("polynomial field needs at least one coefficient");
            break;
        case FieldKind::sigmoid_scaled:
        case FieldKind::sigmoid_reciprocal:
            if (f.params.size() != 4) fail("sigmoid field needs {base, amplitude, steepness, center}");
            break;
        case FieldKind::tabulated:
            if (f.knots.size() < 2 || f.knots.size() != f.params.size()) fail("tabulated field needs >= 2 knots and matching values");
            if (!std::is_sorted(f.knots.begin(), f.knots.end()) ||
                std::adjacent_find(f.knots.begin(), f.knots.end()) != f.knots.end())
                fail("tabulated knots must be strictly ascending");
            if (f.knots.front() > 0.0 || f.knots.back() < 1.0) fail("tabulated knots must cover [0,1]");
            break;
    }
    for (double p : f.params)
        if (!std::isfinite(p)) fail("non-finite parameter");
}

/// Field value at s in [0,1]; throws DomainError outside.
inline double eval_coefficient(const CoefficientField& field, double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("eval_coefficient: s = " + std::to_string(s) + " outside [0,1]");
    return field.value(s);
}

/// Throws CoefficientError unless the field is strictly positive on a 1001-point grid of [0,1].
inline void require_positive(const CoefficientField& field, std::string_view name) {
    for (int i = 0; i <= 1000; ++i) {
        const double s = i / 1000.0;
        const double v = field.value(s);
        if (!(v > 0.0))
            throw CoefficientError(std::string(name) + " is not positive at s = " + std::to_string(s) + " (value " +
                                   std::to_string(v) + ")");
    }
}

struct ModelSpec {
    double beta = 1.0;
    CoefficientField a = CoefficientField::constant(1.0);
    CoefficientField kappa2 = CoefficientField::constant(1.0);
    double tau = 1.0;
    int basis_order = 1;
};

/// beta > 1/4, tau > 0, basis order in {1,2,3}, a and kappa^2 positive on [0,1].
inline void validate_model(const ModelSpec& m) {
    if (!(m.beta > 0.25)) throw ParameterError("model: beta must exceed 1/4 (d = 1 well-posedness)");
    if (!(m.tau > 0.0) || !std::isfinite(m.tau)) throw ParameterError("model: tau must be positive");
    if (m.basis_order < 1 || m.basis_order > 3) throw ParameterError("model: basis_order must be 1, 2 or 3");
    validate_field(m.a, "a");
    validate_field(m.kappa2, "kappa2");
    require_positive(m.a, "a");
    require_positive(m.kappa2, "kappa2");
}

/// Amplitude tau with tau^2 * whittle_variance(2 beta - 1/2, kappa, 1) = 1.
inline double tau_unit_variance(double beta, double kappa) {
    if (!(beta > 0.25)) throw ParameterError("tau_unit_variance: beta must exceed 1/4");
    if (!(kappa > 0.0)) throw ParameterError("tau_unit_variance: kappa must be positive");
    return 1.0 / std::sqrt(whittle_variance(2.0 * beta - 0.5, kappa, 1));
}

enum class BuiltinModel { base41, model1_41, model2_41, base42, model1_42, model2_42 };

inline std::string_view to_string(BuiltinModel m) {
    switch (m) {
        case BuiltinModel::base41: return "base41";
        case BuiltinModel::model1_41: return "model1_41";
        case BuiltinModel::model2_41: return "model2_41";
        case BuiltinModel::base42: return "base42";
        case BuiltinModel::model1_42: return "model1_42";
        case BuiltinModel::model2_42: return "model2_42";
    }
    return "";
}

inline std::optional<BuiltinModel> builtin_from_string(std::string_view s) {
    for (auto m : {BuiltinModel::base41, BuiltinModel::model1_41, BuiltinModel::model2_41, BuiltinModel::base42,
                   BuiltinModel::model1_42, BuiltinModel::model2_42})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

/// The models of the two simulation studies.
///
///  *_41: beta = 1, kappa^2 = 1200, tau = 2 kappa^{3/2}, P1 basis; model 1 replaces kappa^2 by
///        1200 / f(s), model 2 replaces a by f(s), with f(s) = 1 + erf(delta (s - 1/2) / sqrt 2) / 2.
///  *_42: beta in {1,2,3}, kappa^2 = 100 (4 beta - 1), tau from tau_unit_variance, basis order beta;
///        model 1 multiplies kappa^2 by 1 - 1.5 s^2 + s^3, model 2 by 1 + s - 1.5 s^3.
inline ModelSpec builtin_model(BuiltinModel name, int beta, double delta = 10.0) {
    ModelSpec m;
    switch (name) {
        case BuiltinModel::base41:
        case BuiltinModel::model1_41:
        case BuiltinModel::model2_41: {
            if (beta != 1) throw ParameterError(std::string(to_string(name)) + " requires beta = 1");
            if (!(delta > 0.0)) throw ParameterError("delta must be positive");
            constexpr double k2 = 1200.0;
            m.beta = 1.0;
            m.basis_order = 1;
            m.tau = 2.0 * std::pow(k2, 0.75);
            m.a = CoefficientField::constant(1.0);
            m.kappa2 = CoefficientField::constant(k2);
            if (name == BuiltinModel::model1_41) m.kappa2 = CoefficientField::sigmoid_reciprocal(k2, 0.5, delta, 0.5);
            if (name == BuiltinModel::model2_41) m.a = CoefficientField::sigmoid_scaled(1.0, 0.5, delta, 0.5);
            break;
        }
        case BuiltinModel::base42:
        case BuiltinModel::model1_42:
        case BuiltinModel::model2_42: {
            if (beta < 1 || beta > 3) throw ParameterError(std::string(to_string(name)) + " requires beta in {1,2,3}");
            const double k2 = 100.0 * (4.0 * beta - 1.0);
            m.beta = beta;
            m.basis_order = beta;
            m.tau = tau_unit_variance(beta, std::sqrt(k2));
            m.a = CoefficientField::constant(1.0);
            m.kappa2 = CoefficientField::constant(k2);
            if (name == BuiltinModel::model1_42) m.kappa2 = CoefficientField::polynomial({k2, 0.0, -1.5 * k2, k2});
            if (name == BuiltinModel::model2_42) m.kappa2 = CoefficientField::polynomial({k2, k2, 0.0, -1.5 * k2});
            break;
        }
    }
    validate_model(m);
    return m;
}

// ---------------------------------------------------------------------------
// JSON

inline std::string_view to_string(FieldKind k) {
    switch (k) {
        case FieldKind::constant: return "constant";
        case FieldKind::polynomial: return "polynomial";
        case FieldKind::sigmoid_reciprocal: return "sigmoid_reciprocal";
        case FieldKind::sigmoid_scaled: return "sigmoid_scaled";
        case FieldKind::tabulated: return "tabulated";
    }
    return "";
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                                std::string_view where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
    for (const auto& [key, _] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
}

template <class T>
T get_field(const nlohmann::json& j, const char* key, std::string_view where) {
    if (!j.contains(key)) throw ConfigError(std::string(where) + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(where) + "." + key + ": " + e.what());
    }
}

}  // namespace detail

inline nlohmann::json to_json(const CoefficientField& f) {
    nlohmann::json j{{"kind", to_string(f.kind)}, {"params", f.params}};
    if (f.kind == FieldKind::tabulated) j["knots"] = f.knots;
    return j;
}

inline CoefficientField field_from_json(const nlohmann::json& j, std::string_view where) {
    detail::reject_unknown_keys(j, {"kind", "params", "knots"}, where);
    const auto kind = detail::get_field<std::string>(j, "kind", where);
    CoefficientField f;
    if (kind == "constant") f.kind = FieldKind::constant;
    else if (kind == "polynomial") f.kind = FieldKind::polynomial;
    else if (kind == "sigmoid_reciprocal") f.kind = FieldKind::sigmoid_reciprocal;
    else if (kind == "sigmoid_scaled") f.kind = FieldKind::sigmoid_scaled;
    else if (kind == "tabulated") f.kind = FieldKind::tabulated;
    else throw ConfigError(std::string(where) + ".kind: unknown field kind '" + kind + "'");
    f.params = detail::get_field<std::vector<double>>(j, "params", where);
    if (j.contains("knots")) f.knots = detail::get_field<std::vector<double>>(j, "knots", where);
    try {
        validate_field(f, where);
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    return f;
}

inline nlohmann::json to_json(const ModelSpec& m) {
    return {{"beta", m.beta}, {"a", to_json(m.a)}, {"kappa2", to_json(m.kappa2)}, {"tau", m.tau}, {"basis_order", m.basis_order}};
}

/// Accepts an inline ModelSpec {"beta","a","kappa2","tau","basis_order"} or a
/// built-in reference {"builtin": name, "beta": int, "delta": real}.
inline ModelSpec model_from_json(const nlohmann::json& j, std::string_view where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
    try {
        if (j.contains("builtin")) {
            detail::reject_unknown_keys(j, {"builtin", "beta", "delta"}, where);
            const auto name = detail::get_field<std::string>(j, "builtin", where);
            const auto which = builtin_from_string(name);
            if (!which) throw ConfigError(std::string(where) + ".builtin: unknown model '" + name + "'");
            const int beta = j.contains("beta") ? detail::get_field<int>(j, "beta", where) : 1;
            const double delta = j.contains("delta") ? detail::get_field<double>(j, "delta", where) : 10.0;
            return builtin_model(*which, beta, delta);
        }
        detail::reject_unknown_keys(j, {"beta", "a", "kappa2", "tau", "basis_order"}, where);
        ModelSpec m;
        m.beta = detail::get_field<double>(j, "beta", where);
        m.a = field_from_json(j.at("a"), std::string(where) + ".a");
        m.kappa2 = field_from_json(j.at("kappa2"), std::string(where) + ".kappa2");
        m.tau = detail::get_field<double>(j, "tau", where);
        m.basis_order = detail::get_field<int>(j, "basis_order", where);
        validate_model(m);
        return m;
    } catch (const ParameterError& e) {
        throw ConfigError(std::string(where) + ": " + e.what());
    } catch (const CoefficientError& e) {
        throw ConfigError(std::string(where) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(where) + ": " + e.what());
    }
}

}  // namespace wmlab
