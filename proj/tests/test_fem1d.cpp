#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "wmlab/fem1d.hpp"
#include "wmlab/spectral.hpp"

using namespace wmlab;

namespace {

const double kPi = std::numbers::pi;

double l2_error_sin(const SplineBasis& basis, const Eigen::VectorXd& coef) {
    // composite Simpson, 16 panels per element
    const int panels = 16 * basis.n_cells();
    const double step = 1.0 / panels;
    double sum = 0.0;
    for (int i = 0; i <= panels; ++i) {
        const double s = i * step;
        const double u = (s > 0.0 && s < 1.0) ? basis.evaluate(s).dot(coef) : 0.0;
        const double e = u - std::sin(kPi * s);
        const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        sum += w * e * e;
    }
    return std::sqrt(sum * step / 3.0);
}

}  // namespace

TEST(SplineBasis, DofCountsAndErrors) {
    for (int p : {1, 2, 3}) {
        const SplineBasis b(100, p, ConstraintMode::dirichlet);
        EXPECT_EQ(b.n_dof(), 100);
        EXPECT_EQ(b.n_cells(), 102 - p);
        EXPECT_DOUBLE_EQ(b.h(), 1.0 / b.n_cells());
    }
    EXPECT_EQ(SplineBasis(100, 3, ConstraintMode::dirichlet_plus_laplace_zero).n_cells(), 101);
    EXPECT_THROW(SplineBasis(100, 4, ConstraintMode::dirichlet), ConstraintError);
    EXPECT_THROW(SplineBasis(5, 1, ConstraintMode::dirichlet), ConstraintError);
    EXPECT_THROW(SplineBasis(100, 2, ConstraintMode::dirichlet_plus_laplace_zero), ConstraintError);
}

TEST(SplineBasis, PartitionOfUnityBeforeConstraints) {
    for (int p : {1, 2, 3}) {
        const SplineBasis b(40, p, ConstraintMode::dirichlet);
        for (int i = 0; i <= 997; ++i) EXPECT_NEAR(b.unconstrained_sum(i / 997.0), 1.0, 1e-14);
    }
}

TEST(SplineBasis, VanishesOnBoundary) {
    for (int p : {1, 2, 3})
        for (auto mode : {ConstraintMode::dirichlet, ConstraintMode::dirichlet_plus_laplace_zero}) {
            if (p < 3 && mode == ConstraintMode::dirichlet_plus_laplace_zero) continue;
            const SplineBasis b(30, p, mode);
            EXPECT_LT(b.evaluate(0.0).cwiseAbs().maxCoeff(), 1e-15);
            EXPECT_LT(b.evaluate(1.0).cwiseAbs().maxCoeff(), 1e-15);
        }
}

TEST(SplineBasis, LaplaceZeroConstraint) {
    const SplineBasis b(50, 3, ConstraintMode::dirichlet_plus_laplace_zero);
    const double scale = 1.0 / (b.h() * b.h());
    EXPECT_LE(b.evaluate(0.0, 2).cwiseAbs().maxCoeff(), 1e-10 * scale);
    EXPECT_LE(b.evaluate(1.0, 2).cwiseAbs().maxCoeff(), 1e-10 * scale);
    // the plain cubic basis does not satisfy it
    EXPECT_GT(SplineBasis(50, 3, ConstraintMode::dirichlet).evaluate(0.0, 2).cwiseAbs().maxCoeff(), 1.0);
}

TEST(SplineBasis, DerivativesMatchFiniteDifferences) {
    const SplineBasis b(25, 3, ConstraintMode::dirichlet_plus_laplace_zero);
    const double e = 1e-6;
    for (double s : {0.13, 0.517, 0.871}) {
        for (int k = 0; k < 3; ++k) {
            const Eigen::VectorXd fd = (b.evaluate(s + e, k) - b.evaluate(s - e, k)) / (2 * e);
            const Eigen::VectorXd d = b.evaluate(s, k + 1);
            EXPECT_LT((fd - d).cwiseAbs().maxCoeff(), 1e-4 * std::max(1.0, d.cwiseAbs().maxCoeff()));
        }
    }
}

TEST(MassMatrix, HatStencil) {
    const SplineBasis b(50, 1, ConstraintMode::dirichlet);
    const Eigen::MatrixXd M = mass_matrix(b);
    const double h = b.h();
    for (int i = 1; i < 49; ++i) {
        EXPECT_NEAR(M(i, i), 2.0 * h / 3.0, 1e-15);
        EXPECT_NEAR(M(i, i + 1), h / 6.0, 1e-15);
        EXPECT_NEAR(M.row(i).sum(), h, 1e-15);
        EXPECT_EQ(M(i, i + 2), 0.0);
    }
    EXPECT_LT(asymmetry(M), 1e-15);
}

TEST(MassMatrix, SymmetricAllOrders) {
    for (int p : {1, 2, 3}) {
        const SplineBasis b(60, p, ConstraintMode::dirichlet);
        const Eigen::MatrixXd M = mass_matrix(b);
        EXPECT_LT(asymmetry(M), 1e-15);
        EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(M).info(), Eigen::Success);
    }
}

TEST(StiffnessMatrix, LaplaceStencilAndLinearity) {
    const SplineBasis b(50, 1, ConstraintMode::dirichlet);
    const auto lap = assemble_aL(b, CoefficientField::constant(1.0), CoefficientField::constant(0.0));
    const double h = b.h();
    for (int i = 1; i < 49; ++i) {
        EXPECT_NEAR(lap.K(i, i), 2.0 / h, 1e-11);
        EXPECT_NEAR(lap.K(i, i + 1), -1.0 / h, 1e-11);
    }
    const auto shifted = assemble_aL(b, CoefficientField::constant(1.0), CoefficientField::constant(37.0));
    EXPECT_LT((shifted.K - lap.K - 37.0 * lap.M).norm(), 1e-12 * shifted.K.norm());
}

TEST(StiffnessMatrix, QuadratureIndependence) {
    // polynomial coefficients of low degree are integrated exactly by the default rule
    const auto a = CoefficientField::polynomial({1.0, 0.5});
    const auto k2 = CoefficientField::polynomial({100.0, 0.0, -150.0, 100.0});
    for (int p : {1, 2, 3}) {
        const SplineBasis b(40, p, ConstraintMode::dirichlet);
        const auto dflt = assemble_aL(b, a, k2);
        const auto fine = assemble_aL(b, a, k2, p + 8);
        EXPECT_LT((dflt.K - fine.K).norm(), 1e-12 * fine.K.norm()) << "p=" << p;
    }
    // smooth non-polynomial field: converged to near machine precision
    const auto sig = CoefficientField::sigmoid_scaled(1.0, 0.5, 10.0, 0.5);
    const SplineBasis b(200, 1, ConstraintMode::dirichlet);
    const auto dflt = assemble_aL(b, sig, CoefficientField::constant(1200.0));
    const auto fine = assemble_aL(b, sig, CoefficientField::constant(1200.0), 12);
    EXPECT_LT((dflt.K - fine.K).norm(), 1e-10 * fine.K.norm());
}

TEST(StiffnessMatrix, RandomizedSymmetry) {
    std::mt19937_64 rng(20261014);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int N = 10 + static_cast<int>(u(rng) * 21);
        const int p = 1 + static_cast<int>(u(rng) * 3) % 3;
        const SplineBasis b(N, p, ConstraintMode::dirichlet);
        const auto a = CoefficientField::polynomial({0.5 + u(rng), u(rng) - 0.4});
        const auto k2 = CoefficientField::sigmoid_reciprocal(1.0 + 1000.0 * u(rng), 0.5 * u(rng), 100.0 * u(rng), u(rng));
        const auto ops = assemble_aL(b, a, k2);
        ASSERT_LT(asymmetry(ops.M), 1e-14) << trial;
        ASSERT_LT(asymmetry(ops.K), 1e-14) << trial;
    }
}

TEST(StiffnessMatrix, CoefficientChecks) {
    const SplineBasis b(20, 1, ConstraintMode::dirichlet);
    EXPECT_THROW(assemble_aL(b, CoefficientField::polynomial({1.0, -2.0}), CoefficientField::constant(1.0)),
                 CoefficientError);
    EXPECT_THROW(assemble_aL(b, CoefficientField::constant(1.0), CoefficientField::constant(-1.0)), CoefficientError);
    const SplineBasis b2(20, 2, ConstraintMode::dirichlet);
    EXPECT_THROW(assemble_a2(b, CoefficientField::constant(1.0), CoefficientField::constant(1.0)), ConstraintError);
    EXPECT_THROW(assemble_a2(b2, CoefficientField::constant(2.0), CoefficientField::constant(1.0)), UnsupportedError);
}

TEST(HigherOrderForms, SquareSpectrum) {
    const double c = 700.0;
    const SplineBasis b(200, 2, ConstraintMode::dirichlet);
    const auto k2 = CoefficientField::constant(c);
    const auto a1 = assemble_aL(b, CoefficientField::constant(1.0), k2);
    const auto a2 = assemble_a2(b, CoefficientField::constant(1.0), k2);
    EXPECT_LT(asymmetry(a2.K), 1e-12);
    // constant kappa: c^2 M + 2c K_lap + <u'', v''>
    const auto lap = assemble_aL(b, CoefficientField::constant(1.0), CoefficientField::constant(0.0));
    const auto a2_one = assemble_a2(b, CoefficientField::constant(1.0), CoefficientField::constant(1.0));
    const Eigen::MatrixXd expected = (c * c - 1.0) * lap.M + 2.0 * (c - 1.0) * lap.K;
    EXPECT_LT((a2.K - a2_one.K - expected).norm(), 1e-10 * a2.K.norm());
    const auto e1 = generalized_eig(a1);
    const auto e2 = generalized_eig(a2);
    for (int j = 0; j < 20; ++j) {
        EXPECT_NEAR(e2.eigenvalues[j] / (e1.eigenvalues[j] * e1.eigenvalues[j]), 1.0, 0.01) << j;
        const double exact = c + (j + 1) * (j + 1) * kPi * kPi;
        EXPECT_NEAR(e2.eigenvalues[j] / (exact * exact), 1.0, 0.01) << j;
    }
}

TEST(HigherOrderForms, CubeSpectrum) {
    const double c = 1100.0;
    const SplineBasis b(200, 3, ConstraintMode::dirichlet_plus_laplace_zero);
    const auto k2 = CoefficientField::constant(c);
    const auto a1 = assemble_aL(b, CoefficientField::constant(1.0), k2);
    const auto a3 = assemble_a3(b, k2);
    EXPECT_LT(asymmetry(a3.K), 1e-12);
    const auto e1 = generalized_eig(a1);
    const auto e3 = generalized_eig(a3);
    for (int j = 0; j < 10; ++j) {
        EXPECT_NEAR(e3.eigenvalues[j] / std::pow(e1.eigenvalues[j], 3), 1.0, 0.02) << j;
        const double exact = c + (j + 1) * (j + 1) * kPi * kPi;
        EXPECT_NEAR(e3.eigenvalues[j] / std::pow(exact, 3), 1.0, 0.02) << j;
    }
    EXPECT_THROW(assemble_a3(SplineBasis(40, 3, ConstraintMode::dirichlet), k2), ConstraintError);
}

TEST(Interpolation, SineAtCentre) {
    const SplineBasis b(1000, 1, ConstraintMode::dirichlet);
    const Eigen::VectorXd coef = project(b, [](double s) { return std::sin(kPi * s); });
    const Eigen::MatrixXd Phi = point_obs_matrix(b, {0.5});
    EXPECT_NEAR((Phi * coef)(0), 1.0, 1e-4);
}

TEST(Interpolation, SecondOrderConvergence) {
    auto err = [](int N) {
        const SplineBasis b(N, 1, ConstraintMode::dirichlet);
        return l2_error_sin(b, project(b, [](double s) { return std::sin(kPi * s); }));
    };
    EXPECT_GE(err(50) / err(101), 3.9);
    EXPECT_GE(err(101) / err(203), 3.9);
}

TEST(PointObservations, CardinalRowsAndErrors) {
    const SplineBasis b(99, 1, ConstraintMode::dirichlet);
    const Eigen::MatrixXd Phi = point_obs_matrix(b, {0.25, 0.5, 0.333});
    EXPECT_NEAR(Phi(0, 24), 1.0, 1e-14);
    EXPECT_NEAR(Phi.row(0).sum(), 1.0, 1e-14);
    EXPECT_NEAR(Phi(1, 49), 1.0, 1e-14);
    EXPECT_NEAR(Phi.row(2).sum(), 1.0, 1e-14);
    EXPECT_EQ((Phi.row(2).array() != 0.0).count(), 2);
    EXPECT_THROW(point_obs_matrix(b, {0.0}), DomainError);
    EXPECT_THROW(point_obs_matrix(b, {1.2}), DomainError);
}

TEST(IntegralObservations, SineOrthonormality) {
    // nodal P1 interpolation of sin(100 pi s) is off by about (100 pi h)^2 / 12, so use cubics
    const SplineBasis b(1000, 3, ConstraintMode::dirichlet);
    const Eigen::MatrixXd Phi = integral_obs_matrix(b, 100);
    ASSERT_EQ(Phi.rows(), 100);
    ASSERT_EQ(Phi.cols(), 1000);
    Eigen::MatrixXd G(100, 100);
    for (int m = 1; m <= 100; ++m)
        G.col(m - 1) = Phi * project(b, [m](double s) { return std::numbers::sqrt2 * std::sin(m * kPi * s); });
    EXPECT_LT((G - Eigen::MatrixXd::Identity(100, 100)).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(IntegralObservations, ConstantFunction) {
    const SplineBasis b(1000, 1, ConstraintMode::dirichlet);
    const Eigen::MatrixXd Phi = integral_obs_matrix(b, 20);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(b.n_dof());
    const Eigen::VectorXd r = Phi * ones;
    for (int l = 1; l <= 20; ++l) {
        const double exact = std::numbers::sqrt2 * (1.0 - std::cos(l * kPi)) / (l * kPi);
        EXPECT_NEAR(r[l - 1], exact, 1e-4) << l;
    }
    EXPECT_THROW(integral_obs_matrix(b, 0), ParameterError);
    EXPECT_THROW(integral_obs_matrix(b, 1001), ParameterError);
}
