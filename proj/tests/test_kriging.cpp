#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "wmlab/kriging.hpp"

using namespace wmlab;

namespace {

Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i, j) = g(rng);
    Eigen::MatrixXd S = B * B.transpose() / n + 0.05 * Eigen::MatrixXd::Identity(n, n);
    // spread the variances over a few orders of magnitude
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i) d[i] = std::pow(10.0, u(rng));
    return d.asDiagonal() * S * d.asDiagonal();
}

// Independent weights oracle: w = S~^{-1} s~, E = Sigma_tt - 2 w^T s + w^T S w.
double error_oracle(const Eigen::MatrixXd& Sigma, const Eigen::MatrixXd& SigmaTilde, int n, int t) {
    const Eigen::VectorXd w = SigmaTilde.topLeftCorner(n, n).ldlt().solve(SigmaTilde.col(t).head(n));
    return Sigma(t, t) - 2.0 * w.dot(Sigma.col(t).head(n)) + w.dot(Sigma.topLeftCorner(n, n) * w);
}

const Eigen::MatrixXd kThree = (Eigen::MatrixXd(3, 3) << 2, 1, 1, 1, 2, 1, 1, 1, 2).finished();
const Eigen::MatrixXd kThreeTilde = (Eigen::MatrixXd(3, 3) << 3, 1, 1, 1, 3, 1, 1, 1, 3).finished();

}  // namespace

TEST(SigmaMatrix, IdentityObservation) {
    std::mt19937_64 rng(1);
    CovarianceMatrix cov;
    cov.C = random_spd(7, rng);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(7, 7);
    EXPECT_LT((sigma_matrix(I, cov) - cov.C).norm(), 1e-14 * cov.C.norm());
    cov.factor = cov.C.llt().matrixL();
    EXPECT_LT((sigma_matrix(I, cov) - cov.C).norm(), 1e-13 * cov.C.norm());
    EXPECT_THROW(sigma_matrix(Eigen::MatrixXd::Identity(3, 5), cov), DataError);
}

TEST(CorrectError, HandSchurComplement) {
    EXPECT_NEAR(correct_error_variance(kThree, 2, 2), 4.0 / 3.0, 1e-14);
    EXPECT_NEAR(correct_error_variance(kThree, 2, 2), error_oracle(kThree, kThree, 2, 2), 1e-14);
}

TEST(CorrectError, DiagonalSigma) {
    const Eigen::MatrixXd D = Eigen::VectorXd::LinSpaced(6, 1.0, 6.0).asDiagonal();
    for (int t = 3; t < 6; ++t) EXPECT_DOUBLE_EQ(correct_error_variance(D, 3, t), D(t, t));
}

TEST(CorrectError, DuplicatedObservation) {
    // row 3 repeats row 0 of a 3x3 covariance
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(4, 3);
    P.topRows(3).setIdentity();
    P(3, 0) = 1.0;
    const Eigen::MatrixXd S = P * kThree * P.transpose();
    const auto pred = KrigingProblem(S, S, 3).predict({3});
    EXPECT_NEAR(pred[0].true_var, 0.0, 1e-14);
    EXPECT_FALSE(pred[0].efficiency.has_value());
}

TEST(MisspecifiedError, Collapses) {
    EXPECT_DOUBLE_EQ(misspecified_error_variance(kThree, kThree, 2, 2), correct_error_variance(kThree, 2, 2));
    EXPECT_NEAR(misspecified_error_variance(kThree, 2.0 * kThree, 2, 2), correct_error_variance(kThree, 2, 2), 1e-14);
}

TEST(MisspecifiedError, WeightsOracle) {
    const double got = misspecified_error_variance(kThree, kThreeTilde, 2, 2);
    // w = [1/4, 1/4]: E = 2 - 2 * 1/2 + (2 + 2 + 2 * 1) / 16
    EXPECT_NEAR(error_oracle(kThree, kThreeTilde, 2, 2), 1.375, 1e-14);
    EXPECT_NEAR(got, 1.375, 1e-14);
    const auto e = efficiency(kThree, kThreeTilde, 2, 2);
    ASSERT_TRUE(e.has_value());
    EXPECT_NEAR(*e, (1.375 - 4.0 / 3.0) / (4.0 / 3.0), 1e-14);
}

TEST(Efficiency, TrivialCases) {
    std::mt19937_64 rng(2);
    const Eigen::MatrixXd S = random_spd(10, rng);
    for (double c : {1.0, 0.1, 7.0, 1e6}) {
        const auto pred = KrigingProblem(S, c * S, 4).predict({4, 5, 9});
        for (const auto& p : pred) EXPECT_NEAR(*p.efficiency, 0.0, 1e-12);
    }
}

TEST(Efficiency, ArgumentErrors) {
    EXPECT_THROW(KrigingProblem(kThree, kThree, 0), DataError);
    EXPECT_THROW(KrigingProblem(kThree, kThree, 3), DataError);
    EXPECT_THROW(KrigingProblem(kThree, Eigen::MatrixXd::Identity(2, 2), 1), DataError);
    EXPECT_THROW(KrigingProblem(kThree, kThree, 2).predict({1}), DataError);
    Eigen::MatrixXd Z = kThree;
    Z.row(0).setZero();
    Z.col(0).setZero();
    EXPECT_THROW(KrigingProblem(Z, Z, 2), ConditioningError);
    Eigen::MatrixXd singular = Eigen::MatrixXd::Ones(3, 3);
    EXPECT_THROW(KrigingProblem(singular, singular, 2), ConditioningError);
}

TEST(Efficiency, ConditionEstimateAndFlag) {
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(3, 3);
    S(0, 1) = S(1, 0) = 1.0 - 1e-14;
    const KrigingProblem bad(S, S, 2);
    EXPECT_TRUE(bad.flagged());
    EXPECT_GT(bad.condition_estimate(), kConditionFlag);
    const KrigingProblem good(kThree, kThree, 2);
    EXPECT_FALSE(good.flagged());
    EXPECT_LT(good.condition_estimate(), 10.0);
}

// Property suites over random instances of dimension <= 30.

class KrigingProperties : public ::testing::Test {
protected:
    struct Instance {
        Eigen::MatrixXd Sigma, SigmaTilde;
        int n;
    };
    Instance draw(std::mt19937_64& rng) {
        const int dim = std::uniform_int_distribution<int>(2, 30)(rng);
        const int n = std::uniform_int_distribution<int>(1, dim - 1)(rng);
        return {random_spd(dim, rng), random_spd(dim, rng), n};
    }
    static std::vector<int> targets(const Instance& in) {
        std::vector<int> t;
        for (int i = in.n; i < in.Sigma.rows(); ++i) t.push_back(i);
        return t;
    }
};

TEST_F(KrigingProperties, ScaleInvariance) {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> logc(-3.0, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Instance in = draw(rng);
        const double c = std::pow(10.0, logc(rng));
        const auto a = KrigingProblem(in.Sigma, in.SigmaTilde, in.n).predict(targets(in));
        const Eigen::MatrixXd scaled = c * in.SigmaTilde;
        const auto b = KrigingProblem(in.Sigma, scaled, in.n).predict(targets(in));
        for (std::size_t j = 0; j < a.size(); ++j) {
            ASSERT_TRUE(a[j].efficiency && b[j].efficiency);
            ASSERT_LE(std::abs(*a[j].efficiency - *b[j].efficiency), 1e-10 * std::max(1.0, *a[j].efficiency)) << trial;
        }
    }
}

TEST_F(KrigingProperties, Nonnegativity) {
    std::mt19937_64 rng(202);
    for (int trial = 0; trial < 200; ++trial) {
        const Instance in = draw(rng);
        for (const auto& p : KrigingProblem(in.Sigma, in.SigmaTilde, in.n).predict(targets(in))) {
            ASSERT_TRUE(p.efficiency);
            ASSERT_GE(*p.efficiency, -1e-10) << trial;
            ASSERT_GE(p.true_var, 0.0) << trial;
        }
    }
}

TEST_F(KrigingProperties, SchurMonotonicity) {
    std::mt19937_64 rng(303);
    for (int trial = 0; trial < 200; ++trial) {
        const int dim = std::uniform_int_distribution<int>(3, 30)(rng);
        const Eigen::MatrixXd S = random_spd(dim, rng);
        const int t = dim - 1;
        double prev = S(t, t);
        for (int n = 1; n < dim; ++n) {
            const double v = correct_error_variance(S, n, t);
            ASSERT_LE(v, prev * (1.0 + 1e-10)) << trial << " n=" << n;
            prev = v;
        }
    }
}

TEST_F(KrigingProperties, AgreesWithWeightsOracle) {
    std::mt19937_64 rng(404);
    for (int trial = 0; trial < 200; ++trial) {
        const Instance in = draw(rng);
        for (const auto& p : KrigingProblem(in.Sigma, in.SigmaTilde, in.n).predict(targets(in))) {
            const double ref_true = error_oracle(in.Sigma, in.Sigma, in.n, p.target);
            const double ref_missp = error_oracle(in.Sigma, in.SigmaTilde, in.n, p.target);
            const double scale = in.Sigma(p.target, p.target);
            ASSERT_NEAR(p.true_var, ref_true, 1e-9 * scale) << trial;
            ASSERT_NEAR(p.missp_var, ref_missp, 1e-9 * std::max(scale, ref_missp)) << trial;
            ASSERT_NEAR(*p.efficiency, p.missp_var / p.true_var - 1.0, 1e-8 * (1.0 + *p.efficiency)) << trial;
        }
    }
}

TEST(ObservationDesign, PointLayouts) {
    const ObservationDesign fixed{DesignKind::point, 0.5, 0.01, false};
    const auto s = fixed.point_locations(4);
    const std::vector<double> expected{0.49, 0.51, 0.48, 0.52};
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(s[i], expected[i], 1e-15);
    EXPECT_THROW(fixed.validate_points({100}), DomainError);
    EXPECT_NO_THROW(fixed.validate_points({2, 98}));

    const ObservationDesign infill{DesignKind::point, 0.5, 0.01, true, 0.1};
    EXPECT_DOUBLE_EQ(infill.spacing(20), 0.01);
    EXPECT_DOUBLE_EQ(infill.spacing(21), 0.1 / 11);
    for (int n : {2, 20, 100}) {
        const auto p = infill.point_locations(n);
        EXPECT_NEAR(*std::min_element(p.begin(), p.end()), 0.4, 1e-14);
        EXPECT_NEAR(*std::max_element(p.begin(), p.end()), 0.6, 1e-14);
    }
    EXPECT_NO_THROW(infill.validate_points({2, 1000}));
    EXPECT_THROW((ObservationDesign{DesignKind::point, 1.0, 0.01, false}.validate_points({2})), DomainError);
    EXPECT_THROW(infill.validate_points({0}), ParameterError);
}

TEST(EfficiencyCurves, CorrectModelGivesZero) {
    const ModelSpec m = builtin_model(BuiltinModel::base41, 1);
    const auto integral = efficiency_curve_integral(m, m, 200, {10, 50, 100});
    for (double e : integral.e_max) EXPECT_LE(std::abs(e), 1e-8);
    const auto point = efficiency_curve_point(m, m, ObservationDesign{DesignKind::point, 0.5, 0.01, true, 0.1},
                                              {4, 20}, 200);
    for (double e : point.e_max) EXPECT_LE(std::abs(e), 1e-8);
}

TEST(EfficiencyCurves, IntegralCurveShape) {
    const ModelSpec truth = builtin_model(BuiltinModel::base41, 1);
    const ModelSpec wrong = builtin_model(BuiltinModel::model1_41, 1, 10.0);
    const auto c = efficiency_curve_integral(truth, wrong, 200, {5, 20, 100}, true);
    ASSERT_EQ(c.e_max.size(), 3u);
    EXPECT_GT(c.e_max[0], c.e_max[2]);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_GE(c.argmax_target[i], c.n_values[i]);
        EXPECT_LT(c.argmax_target[i], 200);
        EXPECT_NEAR(c.e_max[i], c.argmax_missp_var[i] / c.argmax_true_var[i] - 1.0, 1e-6 * (1 + c.e_max[i]));
    }
    EXPECT_EQ(c.per_target.size(), std::size_t{(200 - 5) + (200 - 20) + (200 - 100)});
    EXPECT_THROW(efficiency_curve_integral(truth, wrong, 200, {101}), ParameterError);
}

TEST(EfficiencyCurves, OptimalityClassifier) {
    EfficiencyCurve c;
    c.e_max = {1.0, 0.5, 0.09};
    EXPECT_TRUE(curve_indicates_optimal(c));
    c.e_max = {1.0, 0.5, 0.11};
    EXPECT_FALSE(curve_indicates_optimal(c));
    EXPECT_FALSE(curve_indicates_optimal(EfficiencyCurve{}));
}
