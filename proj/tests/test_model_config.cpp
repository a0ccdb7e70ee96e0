#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "wmlab/model_config.hpp"

using namespace wmlab;

namespace {

// Maclaurin series for |x| <= 2.5, Laplace continued fraction for erfc beyond.
double erf_oracle(double x) {
    if (x < 0.0) return -erf_oracle(-x);
    if (x <= 2.5) {
        double term = x, sum = x;
        for (int n = 1; n < 200; ++n) {
            term *= -x * x / n;
            sum += term / (2 * n + 1);
        }
        return 2.0 * std::numbers::inv_sqrtpi * sum;
    }
    double f = 0.0;
    for (int k = 400; k >= 1; --k) f = (k / 2.0) / (x + f);
    return 1.0 - std::exp(-x * x) * std::numbers::inv_sqrtpi / (x + f);
}

double f41(double delta, double s) { return 1.0 + 0.5 * erf_oracle(delta * (s - 0.5) / std::numbers::sqrt2); }

}  // namespace

TEST(Erf, LibraryMatchesOracle) {
    EXPECT_EQ(std::erf(0.0), 0.0);
    EXPECT_GT(std::erf(6.0), 1.0 - 1e-12);
    EXPECT_NEAR(erf_oracle(1.0), 0.8427007929497149, 1e-15);
    EXPECT_NEAR(std::erf(1.0), 0.8427007929497149, 1e-16);
    for (double x = -5.0; x <= 5.0; x += 0.125) EXPECT_NEAR(std::erf(x), erf_oracle(x), 1e-13) << x;
}

TEST(CoefficientField, Sigmoid41) {
    const ModelSpec m1 = builtin_model(BuiltinModel::model1_41, 1, 10.0);
    const ModelSpec m2 = builtin_model(BuiltinModel::model2_41, 1, 10.0);
    EXPECT_DOUBLE_EQ(m2.a.value(0.5), 1.0);
    EXPECT_DOUBLE_EQ(m1.kappa2.value(0.5), 1200.0);
    for (double s : {0.0, 0.2, 0.5, 0.7, 1.0}) {
        EXPECT_NEAR(m2.a.value(s), f41(10.0, s), 1e-14);
        EXPECT_NEAR(m1.kappa2.value(s), 1200.0 / f41(10.0, s), 1e-11);
    }
    EXPECT_TRUE(m1.a.is_constant());
    EXPECT_TRUE(m2.kappa2.is_constant());
}

TEST(CoefficientField, Sigmoid41Derivatives) {
    for (double delta : {1.0, 10.0, 100.0}) {
        const ModelSpec m1 = builtin_model(BuiltinModel::model1_41, 1, delta);
        const ModelSpec m2 = builtin_model(BuiltinModel::model2_41, 1, delta);
        for (double s : {0.1, 0.45, 0.5, 0.8}) {
            const double e = 1e-6;
            const double fd_a = (f41(delta, s + e) - f41(delta, s - e)) / (2 * e);
            const double fd_k = 1200.0 * (1.0 / f41(delta, s + e) - 1.0 / f41(delta, s - e)) / (2 * e);
            EXPECT_NEAR(m2.a.derivative(s), fd_a, 1e-6 * std::max(1.0, std::abs(fd_a)));
            EXPECT_NEAR(m1.kappa2.derivative(s), fd_k, 1e-5 * std::max(1.0, std::abs(fd_k)));
        }
    }
}

TEST(CoefficientField, Polynomials42) {
    for (int beta : {1, 2, 3}) {
        const double k2 = 100.0 * (4 * beta - 1);
        const ModelSpec m1 = builtin_model(BuiltinModel::model1_42, beta);
        const ModelSpec m2 = builtin_model(BuiltinModel::model2_42, beta);
        EXPECT_NEAR(m1.kappa2.value(1.0), 0.5 * k2, 1e-12);
        EXPECT_NEAR(m1.kappa2.value(0.0), k2, 1e-12);
        EXPECT_NEAR(m2.kappa2.value(1.0), 0.5 * k2, 1e-12);
        EXPECT_NEAR(m1.kappa2.derivative(0.0), 0.0, 1e-12);
        EXPECT_NEAR(m1.kappa2.derivative(1.0), 0.0, 1e-12);
        EXPECT_NEAR(m2.kappa2.derivative(0.0), k2, 1e-12);
        EXPECT_NEAR(m2.kappa2.derivative(1.0), -3.5 * k2, 1e-12);
        EXPECT_EQ(m1.basis_order, beta);
    }
    EXPECT_DOUBLE_EQ(builtin_model(BuiltinModel::base42, 2).kappa2.value(0.3), 700.0);
}

TEST(CoefficientField, TabulatedIsPiecewiseLinear) {
    const auto f = CoefficientField::tabulated({0.0, 0.5, 1.0}, {1.0, 3.0, 2.0});
    EXPECT_NO_THROW(validate_field(f, "t"));
    EXPECT_DOUBLE_EQ(f.value(0.25), 2.0);
    EXPECT_DOUBLE_EQ(f.value(1.0), 2.0);
    EXPECT_DOUBLE_EQ(f.derivative(0.75), -2.0);
    EXPECT_THROW(validate_field(CoefficientField::tabulated({0.0, 0.5}, {1.0, 2.0}), "t"), ParameterError);
    EXPECT_THROW(validate_field(CoefficientField::tabulated({0.0, 0.5, 0.5, 1.0}, {1, 2, 3, 4}), "t"), ParameterError);
}

TEST(CoefficientField, ScaledAndDomain) {
    const auto f = CoefficientField::sigmoid_scaled(2.0, 0.5, 10.0, 0.5);
    EXPECT_NEAR(f.scaled(3.0).value(0.3), 3.0 * f.value(0.3), 1e-14);
    EXPECT_NEAR(CoefficientField::polynomial({1, 2, 3}).scaled(2.0).value(0.5), 2.0 * 2.75, 1e-15);
    EXPECT_THROW(eval_coefficient(f, -0.01), DomainError);
    EXPECT_THROW(eval_coefficient(f, 1.5), DomainError);
    EXPECT_DOUBLE_EQ(eval_coefficient(f, 0.5), 2.0);
}

TEST(Tau, UnitVarianceCalibration) {
    for (double kappa : {0.5, 3.0, std::sqrt(1200.0)})
        EXPECT_NEAR(tau_unit_variance(1.0, kappa), 2.0 * std::pow(kappa, 1.5), 1e-12 * std::pow(kappa, 1.5));
    EXPECT_NEAR(2.0 * std::pow(1200.0, 0.75), 407.7706, 1e-4);
    for (double beta : {0.6, 1.0, 2.0, 3.0, 3.7})
        for (double kappa : {1.0, 20.0}) {
            const double t = tau_unit_variance(beta, kappa);
            EXPECT_NEAR(t * t * whittle_variance(2 * beta - 0.5, kappa, 1), 1.0, 1e-12);
        }
    // beta = 2: Gamma(7/2) / (sqrt(4 pi) Gamma(4)) = 15/96
    const double kappa = std::sqrt(700.0);
    EXPECT_NEAR(builtin_model(BuiltinModel::base42, 2).tau, std::sqrt(96.0 / 15.0) * std::pow(kappa, 3.5),
                1e-9 * std::pow(kappa, 3.5));
    EXPECT_THROW(tau_unit_variance(0.25, 1.0), ParameterError);
}

TEST(Builtins, Base41) {
    const ModelSpec m = builtin_model(BuiltinModel::base41, 1);
    EXPECT_EQ(m.beta, 1.0);
    EXPECT_EQ(m.basis_order, 1);
    EXPECT_DOUBLE_EQ(m.kappa2.value(0.9), 1200.0);
    EXPECT_DOUBLE_EQ(m.a.value(0.1), 1.0);
    EXPECT_NEAR(m.tau, 407.7706, 1e-4);
    EXPECT_THROW(builtin_model(BuiltinModel::base41, 2), ParameterError);
    EXPECT_THROW(builtin_model(BuiltinModel::model1_41, 1, 0.0), ParameterError);
    EXPECT_THROW(builtin_model(BuiltinModel::base42, 4), ParameterError);
}

TEST(Builtins, NamesRoundTrip) {
    for (auto m : {BuiltinModel::base41, BuiltinModel::model1_41, BuiltinModel::model2_41, BuiltinModel::base42,
                   BuiltinModel::model1_42, BuiltinModel::model2_42})
        EXPECT_EQ(builtin_from_string(to_string(m)), m);
    EXPECT_FALSE(builtin_from_string("model3"));
}

TEST(Validation, RejectsBadModels) {
    ModelSpec m;
    m.beta = 0.25;
    EXPECT_THROW(validate_model(m), ParameterError);
    m.beta = 1.0;
    m.tau = 0.0;
    EXPECT_THROW(validate_model(m), ParameterError);
    m.tau = 1.0;
    m.basis_order = 4;
    EXPECT_THROW(validate_model(m), ParameterError);
    m.basis_order = 1;
    m.a = CoefficientField::polynomial({1.0, -2.0});
    EXPECT_THROW(validate_model(m), CoefficientError);
    m.a = CoefficientField::constant(1.0);
    m.kappa2 = CoefficientField::constant(0.0);
    EXPECT_THROW(validate_model(m), CoefficientError);
    m.kappa2 = CoefficientField::constant(NAN);
    EXPECT_THROW(validate_model(m), ParameterError);
}

TEST(Json, RoundTripAndErrors) {
    const ModelSpec m = builtin_model(BuiltinModel::model2_41, 1, 100.0);
    const ModelSpec back = model_from_json(to_json(m), "m");
    EXPECT_EQ(back.beta, m.beta);
    EXPECT_EQ(back.tau, m.tau);
    EXPECT_EQ(back.a.params, m.a.params);
    EXPECT_EQ(back.kappa2.kind, m.kappa2.kind);

    const ModelSpec b = model_from_json(nlohmann::json{{"builtin", "model1_42"}, {"beta", 3}}, "m");
    EXPECT_NEAR(b.kappa2.value(1.0), 550.0, 1e-12);

    auto j = to_json(m);
    j["colour"] = "red";
    EXPECT_THROW(model_from_json(j, "m"), ConfigError);
    EXPECT_THROW(model_from_json(nlohmann::json{{"builtin", "nope"}}, "m"), ConfigError);
    EXPECT_THROW(model_from_json(nlohmann::json{{"builtin", "base42"}, {"beta", 5}}, "m"), ConfigError);
    auto bad = to_json(m);
    bad["a"]["kind"] = "spline";
    EXPECT_THROW(model_from_json(bad, "m"), ConfigError);
    bad = to_json(m);
    bad.erase("tau");
    EXPECT_THROW(model_from_json(bad, "m"), ConfigError);
    bad = to_json(m);
    bad["beta"] = "one";
    EXPECT_THROW(model_from_json(bad, "m"), ConfigError);
}
