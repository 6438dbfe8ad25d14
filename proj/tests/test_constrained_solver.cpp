#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sdd/constrained_solver.hpp"
#include "sdd/error.hpp"

using namespace sdd;

namespace {

Eigen::MatrixXd normal_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd M(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) M(i, j) = n(rng);
    return M;
}

BetaProblem problem(const Eigen::MatrixXd& H, const Eigen::VectorXd& k, double ridge = 0.0) {
    BetaProblem p;
    p.H = H;
    p.k = k;
    p.ridge = ridge;
    return p;
}

}  // namespace

TEST(BetaProblem, ObjectiveAndGradient) {
    Eigen::MatrixXd H(2, 1);
    H << 1.0, 2.0;
    Eigen::VectorXd k(2);
    k << 1.0, 1.0;
    const BetaProblem p = problem(H, k, 2.0);
    Eigen::VectorXd b(1);
    b << 0.5;
    // 1/4 * ((0.5)^2 + 0^2) + 2/4 * 0.25
    EXPECT_NEAR(p.objective(b), 0.0625 + 0.125, 1e-15);
    const double h = 1e-6;
    Eigen::VectorXd bp = b, bm = b;
    bp[0] += h;
    bm[0] -= h;
    EXPECT_NEAR(p.gradient(b)[0], (p.objective(bp) - p.objective(bm)) / (2 * h), 1e-8);
}

TEST(BetaProblem, Validation) {
    BetaProblem p = problem(normal_matrix(5, 3, 1), Eigen::VectorXd::Zero(4));
    EXPECT_THROW(p.validate(), InvalidInput);
    p.k = Eigen::VectorXd::Zero(5);
    p.ridge = -1.0;
    EXPECT_THROW(p.validate(), InvalidInput);
    p.ridge = 0.0;
    p.lower = 3.0;
    EXPECT_THROW(p.validate(), InvalidInput);
    p.lower = 0.0;
    p.anchor = Eigen::VectorXd::Ones(2);
    EXPECT_THROW(p.validate(), InvalidInput);
    p.anchor.resize(0);
    EXPECT_NO_THROW(p.validate());
    EXPECT_EQ(p.anchor_or_ones(), Eigen::VectorXd::Ones(3));
}

TEST(SolveBeta, RecoversOnesAtZeroRidge) {
    const Eigen::MatrixXd H = normal_matrix(100, 3, 2);
    const Eigen::VectorXd k = H * Eigen::VectorXd::Ones(3);
    const BetaVector b = solve_beta_constrained(problem(H, k));
    EXPECT_LT((b.values - Eigen::VectorXd::Ones(3)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(SolveBeta, HugeRidgePinsToAnchor) {
    const Eigen::MatrixXd H = normal_matrix(100, 3, 3);
    const Eigen::VectorXd k = normal_matrix(100, 1, 4).col(0);
    const BetaVector b = solve_beta_constrained(problem(H, k, 1e6));
    EXPECT_LT((b.values - Eigen::VectorXd::Ones(3)).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(SolveBeta, InteriorSolutionMatchesNormalEquations) {
    const Eigen::MatrixXd H = normal_matrix(80, 3, 5);
    Eigen::VectorXd target(3);
    target << 0.4, 2.2, 1.7;
    const Eigen::VectorXd k = H * target + 0.01 * normal_matrix(80, 1, 6).col(0);
    const double ridge = 0.5;
    const BetaVector b = solve_beta_constrained(problem(H, k, ridge));
    Eigen::MatrixXd A = H.transpose() * H;
    A.diagonal().array() += ridge;
    const Eigen::VectorXd expected =
        A.ldlt().solve(H.transpose() * k + ridge * Eigen::VectorXd::Ones(3));
    EXPECT_LT((b.values - expected).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SolveBeta, OrthonormalDesignIsProjectionClamped) {
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(normal_matrix(20, 3, 7));
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(20, 3);
    Eigen::VectorXd c(3);
    c << -0.5, 1.25, 4.0;
    const Eigen::VectorXd k = Q * c;
    const BetaVector b = solve_beta_constrained(problem(Q, k));
    EXPECT_NEAR(b[0], 0.0, 1e-10);
    EXPECT_NEAR(b[1], 1.25, 1e-10);
    EXPECT_NEAR(b[2], 3.0, 1e-10);
}

TEST(SolveBeta, NeverWorseThanAnchorAndAlwaysFeasible) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Eigen::MatrixXd H = normal_matrix(30, 3, 100 + seed);
        const Eigen::VectorXd k = 3.0 * normal_matrix(30, 1, 200 + seed).col(0);
        const BetaProblem p = problem(H, k, seed % 2 == 0 ? 0.0 : 0.3);
        const BetaVector b = solve_beta_constrained(p);
        EXPECT_GE(b.values.minCoeff(), 0.0);
        EXPECT_LE(b.values.maxCoeff(), 3.0);
        EXPECT_LE(p.objective(b.values), p.objective(Eigen::VectorXd::Ones(3)) + 1e-12);
        EXPECT_TRUE(satisfies_kkt(p, b.values));
    }
}

TEST(SolveBeta, MatchesGridSearchInOneDimension) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Eigen::MatrixXd H = normal_matrix(25, 1, 300 + seed);
        const Eigen::VectorXd k = 2.0 * normal_matrix(25, 1, 400 + seed).col(0);
        const BetaProblem p = problem(H, k, 0.1);
        double best = 0.0, best_obj = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 30000; ++i) {
            Eigen::VectorXd b(1);
            b << i * 1e-4;
            const double o = p.objective(b);
            if (o < best_obj) best_obj = o, best = b[0];
        }
        EXPECT_NEAR(solve_beta_constrained(p)[0], best, 2e-4);
    }
}

TEST(SolveBeta, RankDeficientPrefersAnchor) {
    // Only the first column carries signal; the other two are zero.
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(10, 3);
    H.col(0) = normal_matrix(10, 1, 8).col(0);
    const Eigen::VectorXd k = 2.0 * H.col(0);
    const BetaVector b = solve_beta_constrained(problem(H, k));
    EXPECT_NEAR(b[0], 2.0, 1e-8);
    EXPECT_NEAR(b[1], 1.0, 1e-8);
    EXPECT_NEAR(b[2], 1.0, 1e-8);
}

TEST(SolveBeta, RespectsCustomBoundsAndAnchor) {
    const Eigen::MatrixXd H = normal_matrix(40, 2, 9);
    BetaProblem p = problem(H, Eigen::VectorXd::Zero(40), 1e6);
    p.lower = -1.0;
    p.upper = 0.5;
    p.anchor = Eigen::Vector2d(2.0, -0.25);
    const BetaVector b = solve_beta_constrained(p);
    EXPECT_NEAR(b[0], 0.5, 1e-9);
    EXPECT_NEAR(b[1], -0.25, 1e-4);
}

TEST(SatisfiesKkt, DetectsNonOptimalPoints) {
    const Eigen::MatrixXd H = normal_matrix(50, 3, 10);
    const Eigen::VectorXd k = H * Eigen::Vector3d(0.5, 1.5, 2.5);
    const BetaProblem p = problem(H, k);
    EXPECT_TRUE(satisfies_kkt(p, Eigen::Vector3d(0.5, 1.5, 2.5)));
    EXPECT_FALSE(satisfies_kkt(p, Eigen::Vector3d(1.0, 1.0, 1.0)));
    EXPECT_FALSE(satisfies_kkt(p, Eigen::Vector3d(-0.1, 1.5, 2.5)));
}

TEST(LeastSquares, ExactAndMinimumNorm) {
    const Eigen::MatrixXd A = normal_matrix(30, 3, 11);
    const Eigen::Vector3d x(0.3, -7.0, 12.5);
    const LeastSquaresResult r = least_squares(A, A * x);
    EXPECT_LT((r.coefficients - x).norm(), 1e-10);
    EXPECT_EQ(r.rank, 3);
    EXPECT_FALSE(r.rank_deficient);

    Eigen::MatrixXd D(3, 2);
    D << 1, 1, 2, 2, 3, 3;
    const LeastSquaresResult rd = least_squares(D, D * Eigen::Vector2d(2.0, 0.0));
    EXPECT_TRUE(rd.rank_deficient);
    EXPECT_NEAR(rd.coefficients[0], 1.0, 1e-10);
    EXPECT_NEAR(rd.coefficients[1], 1.0, 1e-10);
}

TEST(SolveBetaOls, ExactForArbitraryTarget) {
    const Eigen::MatrixXd H = normal_matrix(60, 3, 12);
    const Eigen::Vector3d target(-4.0, 0.0, 9.5);
    const OlsBeta o = solve_beta_ols(H, H * target);
    EXPECT_LT((o.beta.values - target).norm(), 1e-10);
    EXPECT_FALSE(o.rank_deficient);

    const Eigen::VectorXd k = normal_matrix(60, 1, 13).col(0);
    const Eigen::VectorXd normal = (H.transpose() * H).ldlt().solve(H.transpose() * k);
    EXPECT_LT((solve_beta_ols(H, k).beta.values - normal).norm(), 1e-8);
}

TEST(SolveBetaOls, AgreesWithConstrainedWhenInterior) {
    const Eigen::MatrixXd H = normal_matrix(60, 3, 14);
    const Eigen::VectorXd k = H * Eigen::Vector3d(0.8, 1.1, 2.0) + 0.05 * normal_matrix(60, 1, 15).col(0);
    const OlsBeta o = solve_beta_ols(H, k);
    ASSERT_GT(o.beta.values.minCoeff(), 0.0);
    ASSERT_LT(o.beta.values.maxCoeff(), 3.0);
    EXPECT_LT((solve_beta_constrained(problem(H, k)).values - o.beta.values).norm(), 1e-8);
}

TEST(CvBetaRidge, ScoresAndSelection) {
    const Eigen::MatrixXd H = normal_matrix(100, 3, 16);
    const Eigen::VectorXd k = H * Eigen::Vector3d::Ones();
    const std::vector<double> grid = {1e-4, 1e-2, 1.0};
    const BetaRidgeSelection sel = cv_select_beta_ridge(problem(H, k), grid, 5, 0);
    ASSERT_EQ(sel.scores.size(), 3u);
    // Noise-free data at the anchor: every ridge fits exactly, so the tie breaks upward.
    EXPECT_EQ(sel.ridge, 1.0);
    for (double s : sel.scores) EXPECT_LT(s, 1e-20);

    const std::vector<double> empty;
    EXPECT_THROW((void)cv_select_beta_ridge(problem(H, k), empty, 5, 0), InvalidInput);
}

TEST(CvBetaRidge, PrefersSmallRidgeFarFromAnchor) {
    const Eigen::MatrixXd H = normal_matrix(100, 3, 17);
    const Eigen::VectorXd k = H * Eigen::Vector3d(0.1, 2.9, 0.2);
    const std::vector<double> grid = {1e-6, 10.0, 1000.0};
    EXPECT_EQ(cv_select_beta_ridge(problem(H, k), grid, 5, 1).ridge, 1e-6);
}
