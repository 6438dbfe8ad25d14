#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "sdd/error.hpp"
#include "sdd/evaluation.hpp"
#include "sdd/kernel_regression.hpp"

using namespace sdd;

namespace {

Eigen::MatrixXd uniform_matrix(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double lo = -1.0,
                               double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) X(i, j) = u(rng);
    return X;
}

KernelSpec unit_spec(Eigen::Index d, KernelCombine combine = KernelCombine::product) {
    KernelSpec s;
    s.combine = combine;
    s.input_lo = Eigen::VectorXd::Zero(d);
    s.input_hi = Eigen::VectorXd::Ones(d);
    return s;
}

// Closed form typed out independently of the library.
double ink_reference(double a, double b) {
    const double m = a < b ? a : b;
    return 1.0 + a * b + a * b * m - (a + b) / 2.0 * m * m + m * m * m / 3.0;
}

}  // namespace

TEST(InkSpline, ClosedFormValues) {
    EXPECT_DOUBLE_EQ(ink_spline_deg1(0.0, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(ink_spline_deg1(1.0, 1.0), 7.0 / 3.0);
    // a = 0.5, b = 0.25: 1 + 0.125 + 0.03125 - 0.0234375 + 0.015625 / 3
    EXPECT_NEAR(ink_spline_deg1(0.5, 0.25), 1.0 + 0.125 + 0.03125 - 0.0234375 + 0.015625 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(ink_spline_deg1(0.0, 0.7), 1.0);
}

TEST(InkSpline, SymmetricOnRandomPairs) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double a = u(rng), b = u(rng);
        EXPECT_EQ(ink_spline_deg1(a, b), ink_spline_deg1(b, a));
        EXPECT_NEAR(ink_spline_deg1(a, b), ink_reference(a, b), 1e-14);
    }
}

TEST(KernelEval, SumAndProductCombine) {
    const std::vector<double> u = {0.2, 0.9}, v = {0.6, 0.3};
    const double k0 = ink_reference(0.2, 0.6), k1 = ink_reference(0.9, 0.3);
    EXPECT_NEAR(kernel_eval(unit_spec(2, KernelCombine::sum), u, v), k0 + k1, 1e-14);
    EXPECT_NEAR(kernel_eval(unit_spec(2, KernelCombine::product), u, v), k0 * k1, 1e-14);
}

TEST(KernelEval, OneDimensionalExamples) {
    const KernelSpec s = unit_spec(1);
    const std::vector<double> zero = {0.0}, one = {1.0};
    EXPECT_DOUBLE_EQ(kernel_eval(s, zero, zero), 1.0);
    EXPECT_DOUBLE_EQ(kernel_eval(s, one, one), 7.0 / 3.0);
}

TEST(KernelEval, RescalesAndClamps) {
    KernelSpec s;
    s.input_lo = Eigen::VectorXd::Constant(1, -1.0);
    s.input_hi = Eigen::VectorXd::Constant(1, 1.0);
    const std::vector<double> a = {0.0}, b = {1.0}, far = {5.0};
    EXPECT_NEAR(kernel_eval(s, a, b), ink_reference(0.5, 1.0), 1e-14);
    EXPECT_DOUBLE_EQ(kernel_eval(s, a, far), kernel_eval(s, a, b));
}

TEST(KernelEval, SymmetricForRandomPoints) {
    KernelSpec s = unit_spec(3);
    s = s.bounded_to(uniform_matrix(10, 3, 2));
    const Eigen::MatrixXd P = uniform_matrix(200, 3, 3);
    for (Eigen::Index i = 0; i < 100; ++i) {
        const Eigen::RowVectorXd u = P.row(2 * i), v = P.row(2 * i + 1);
        const std::span<const double> su(u.data(), 3), sv(v.data(), 3);
        EXPECT_EQ(kernel_eval(s, su, sv), kernel_eval(s, sv, su));
    }
}

TEST(KernelEval, DimensionMismatchThrows) {
    const std::vector<double> u = {0.1, 0.2}, v = {0.1};
    EXPECT_THROW((void)kernel_eval(unit_spec(2), u, v), InvalidInput);
    EXPECT_THROW((void)kernel_eval(unit_spec(1), u, u), InvalidInput);
}

TEST(KernelSpec, ValidationRules) {
    KernelSpec s;
    EXPECT_THROW(s.validate(), InvalidInput);
    s.input_lo = Eigen::VectorXd::Constant(1, 1.0);
    s.input_hi = Eigen::VectorXd::Constant(1, 1.0);
    EXPECT_THROW(s.validate(), InvalidInput);
    s.input_hi[0] = 2.0;
    EXPECT_NO_THROW(s.validate());
    s.kind = KernelKind::rbf;
    s.rbf_bandwidth = 0.0;
    EXPECT_THROW(s.validate(), InvalidInput);
}

TEST(KernelSpec, ConstantColumnGetsUnitInterval) {
    Eigen::MatrixXd X(3, 1);
    X << 2.0, 2.0, 2.0;
    const KernelSpec s = KernelSpec{}.bounded_to(X);
    EXPECT_DOUBLE_EQ(s.input_lo[0], 1.5);
    EXPECT_DOUBLE_EQ(s.input_hi[0], 2.5);
}

class GramProperties : public ::testing::TestWithParam<KernelCombine> {};

TEST_P(GramProperties, SymmetricAndPositiveSemidefinite) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Eigen::MatrixXd X = uniform_matrix(50, 3, seed);
        KernelSpec s;
        s.combine = GetParam();
        const Eigen::MatrixXd G = gram_matrix(s.bounded_to(X), X);
        for (Eigen::Index i = 0; i < G.rows(); ++i)
            for (Eigen::Index j = 0; j < G.cols(); ++j) ASSERT_EQ(G(i, j), G(j, i));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-8 * G.trace());
    }
}

INSTANTIATE_TEST_SUITE_P(Combine, GramProperties,
                         ::testing::Values(KernelCombine::sum, KernelCombine::product));

TEST(FitKrr, SinglePointInterpolates) {
    Eigen::MatrixXd X(1, 2);
    X << 0.3, -0.2;
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 4.5);
    const KernelRegressor m = fit_krr(X, y, KernelSpec{}, 0.0);
    EXPECT_NEAR(m.predict(X)[0], 4.5, 1e-12);
    const Eigen::MatrixXd rep = X.replicate(3, 1);
    const Eigen::VectorXd p = m.predict(rep);
    EXPECT_EQ(p[0], p[1]);
    EXPECT_EQ(p[1], p[2]);
}

TEST(FitKrr, InterpolatesAtZeroRidge) {
    Eigen::MatrixXd X(2, 1);
    X << -0.5, 0.7;
    Eigen::VectorXd y(2);
    y << 1.0, -2.0;
    const KernelRegressor m = fit_krr(X, y, KernelSpec{}, 0.0);
    EXPECT_NEAR(m.predict(X)[0], 1.0, 1e-8);
    EXPECT_NEAR(m.predict(X)[1], -2.0, 1e-8);

    const Eigen::MatrixXd X20 = uniform_matrix(20, 2, 4);
    Eigen::VectorXd y20(20);
    for (Eigen::Index i = 0; i < 20; ++i) y20[i] = std::sin(3 * X20(i, 0)) + X20(i, 1);
    const KernelRegressor m20 = fit_krr(X20, y20, KernelSpec{}, 0.0);
    EXPECT_LT((m20.predict(X20) - y20).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FitKrr, DualWeightsSolveRegularizedSystem) {
    const Eigen::MatrixXd X = uniform_matrix(30, 3, 5);
    const Eigen::VectorXd y = X.rowwise().sum();
    const double lambda = 1e-3;
    const KernelRegressor m = fit_krr(X, y, KernelSpec{}, lambda);
    Eigen::MatrixXd A = gram_matrix(m.spec(), X);
    A.diagonal().array() += 30 * lambda;
    EXPECT_LT((A * m.dual_weights() - y).norm(), 1e-9 * y.norm());
}

TEST(FitKrr, TrainingErrorNonDecreasingInRidge) {
    const Eigen::MatrixXd X = uniform_matrix(20, 2, 6);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> noise(0.0, 0.3);
    Eigen::VectorXd y(20);
    for (Eigen::Index i = 0; i < 20; ++i) y[i] = X(i, 0) * X(i, 1) + noise(rng);
    double prev_mse = -1.0, prev_norm = std::numeric_limits<double>::infinity();
    for (double lambda : {0.0, 1e-8, 1e-6, 1e-4, 1e-2, 1e-1, 1.0}) {
        const KernelRegressor m = fit_krr(X, y, KernelSpec{}, lambda);
        const double e = mse(m.predict(X), y);
        EXPECT_GE(e, prev_mse - 1e-12);
        EXPECT_LE(m.dual_weights().norm(), prev_norm * (1 + 1e-8));
        prev_mse = e;
        prev_norm = m.dual_weights().norm();
    }
}

TEST(FitKrr, DuplicatePointsAtZeroRidgeThrowWhenInconsistent) {
    Eigen::MatrixXd X(2, 1);
    X << 0.5, 0.5;
    Eigen::VectorXd y(2);
    y << 1.0, 2.0;
    EXPECT_THROW((void)fit_krr(X, y, KernelSpec{}, 0.0), NumericalRankError);
    EXPECT_NO_THROW((void)fit_krr(X, y, KernelSpec{}, 1e-3));
}

TEST(FitKrr, RejectsBadInput) {
    Eigen::MatrixXd X(2, 1);
    X << 0.0, std::nan("");
    EXPECT_THROW((void)fit_krr(X, Eigen::VectorXd::Zero(2), KernelSpec{}, 0.1), InvalidInput);
    X(1, 0) = 1.0;
    EXPECT_THROW((void)fit_krr(X, Eigen::VectorXd::Zero(3), KernelSpec{}, 0.1), InvalidInput);
    EXPECT_THROW((void)fit_krr(X, Eigen::VectorXd::Zero(2), KernelSpec{}, -1.0), InvalidInput);
}

TEST(Predict, ZeroWeightsAndDimensionCheck) {
    const Eigen::MatrixXd X = uniform_matrix(5, 2, 8);
    const KernelRegressor m(KernelSpec{}.bounded_to(X), X, Eigen::VectorXd::Zero(5), 0.1);
    EXPECT_EQ(m.predict(uniform_matrix(4, 2, 9)), Eigen::VectorXd::Zero(4));
    EXPECT_THROW((void)m.predict(uniform_matrix(4, 3, 9)), InvalidInput);
}

TEST(Predict, MatchesKernelSum) {
    const Eigen::MatrixXd X = uniform_matrix(15, 2, 10);
    const KernelRegressor m = fit_krr(X, X.col(0), KernelSpec{}, 1e-2);
    const Eigen::MatrixXd T = uniform_matrix(6, 2, 11);
    const Eigen::VectorXd p = m.predict(T);
    for (Eigen::Index t = 0; t < T.rows(); ++t) {
        double acc = 0.0;
        const Eigen::RowVectorXd u = T.row(t);
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const Eigen::RowVectorXd v = X.row(i);
            acc += m.dual_weights()[i] * kernel_eval(m.spec(), {u.data(), 2}, {v.data(), 2});
        }
        EXPECT_NEAR(p[t], acc, 1e-12);
    }
}

TEST(MakeFolds, BalancedAndSeeded) {
    const auto a = make_folds(23, 5, 42);
    const auto b = make_folds(23, 5, 42);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, make_folds(23, 5, 43));
    for (int f = 0; f < 5; ++f) {
        const auto c = std::count(a.begin(), a.end(), f);
        EXPECT_TRUE(c == 4 || c == 5);
    }
    EXPECT_THROW((void)make_folds(3, 5, 0), InvalidInput);
    EXPECT_THROW((void)make_folds(10, 1, 0), InvalidInput);
}

TEST(CvSelectRidge, NoiseFreeSmoothTargetPicksSmallRidge) {
    const Eigen::MatrixXd X = uniform_matrix(100, 1, 12);
    const Eigen::VectorXd y = X.col(0).array().sin();
    const auto grid = default_ridge_grid();
    EXPECT_LE(cv_select_ridge(X, y, KernelSpec{}, grid, 5, 1), 1e-4);
}

TEST(CvSelectRidge, PureNoisePicksLargestRidge) {
    const Eigen::MatrixXd X = uniform_matrix(100, 1, 13);
    std::mt19937_64 rng(14);
    std::normal_distribution<double> noise(0.0, 1.0);
    Eigen::VectorXd y(100);
    for (auto& v : y) v = noise(rng);
    const auto grid = default_ridge_grid();
    EXPECT_EQ(cv_select_ridge(X, y, KernelSpec{}, grid, 5, 1), 1e-1);
}

TEST(CvSelectRidge, SingleElementGridAndErrors) {
    const Eigen::MatrixXd X = uniform_matrix(10, 1, 15);
    const std::vector<double> one = {0.37};
    EXPECT_EQ(cv_select_ridge(X, X.col(0), KernelSpec{}, one, 5, 0), 0.37);
    const std::vector<double> grid = default_ridge_grid();
    EXPECT_THROW((void)cv_select_ridge(X.topRows(3), X.col(0).head(3), KernelSpec{}, grid, 5, 0),
                 InvalidInput);
    const std::vector<double> empty;
    EXPECT_THROW((void)cv_select_ridge(X, X.col(0), KernelSpec{}, empty, 5, 0), InvalidInput);
}

TEST(CvSelectRidge, TiesGoToLargerRidge) {
    // A constant target is fitted identically well by every small ridge.
    const Eigen::MatrixXd X = uniform_matrix(20, 1, 16);
    const Eigen::VectorXd y = Eigen::VectorXd::Zero(20);
    const std::vector<double> grid = {1e-6, 1e-4, 1e-2};
    const RidgeSelection sel = cv_ridge_scores(X, y, KernelSpec{}, grid, 5, 0);
    EXPECT_EQ(sel.ridge, 1e-2);
}

TEST(KrrConvergence, MedianTestErrorDecreasesWithSampleSize) {
    std::vector<double> medians;
    for (int n : {50, 100, 200}) {
        std::vector<double> errs;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const Eigen::MatrixXd X = uniform_matrix(n, 1, 100 + seed);
            std::mt19937_64 rng(200 + seed);
            std::normal_distribution<double> noise(0.0, std::sqrt(0.1));
            Eigen::VectorXd y(n);
            for (Eigen::Index i = 0; i < n; ++i) y[i] = std::tanh(2 * X(i, 0)) + noise(rng);
            const auto grid = default_ridge_grid();
            const KernelRegressor m = fit_krr_cv(X, y, KernelSpec{}, grid, 5, seed);
            const Eigen::MatrixXd T = uniform_matrix(500, 1, 300 + seed);
            const Eigen::VectorXd truth = (2.0 * T.col(0).array()).tanh().matrix();
            errs.push_back(mse(m.predict(T), truth));
        }
        medians.push_back(median(errs));
    }
    EXPECT_LT(medians[1], medians[0]);
    EXPECT_LT(medians[2], medians[1]);
}

TEST(RbfKernel, AlternateSpecFits) {
    KernelSpec s;
    s.kind = KernelKind::rbf;
    s.rbf_bandwidth = 0.3;
    const Eigen::MatrixXd X = uniform_matrix(40, 2, 17);
    const Eigen::VectorXd y = X.col(0) - X.col(1);
    const KernelRegressor m = fit_krr(X, y, s, 1e-6);
    EXPECT_LT(mse(m.predict(X), y), 1e-4);
}
