#include "sdd/constrained_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sdd/error.hpp"
#include "sdd/kernel_regression.hpp"

namespace sdd {
namespace {

enum class Bound : unsigned char { free, lower, upper };

constexpr Eigen::Index kMaxEnumeratedDims = 8;

// Solution of A x = r nearest to `anchor` (exact when A is invertible).
Eigen::VectorXd solve_nearest(const Eigen::MatrixXd& A, const Eigen::VectorXd& r,
                              const Eigen::VectorXd& anchor) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) {
        const double diag_max = A.diagonal().cwiseAbs().maxCoeff();
        const double diag_min = llt.matrixL().toDenseMatrix().diagonal().cwiseAbs2().minCoeff();
        if (diag_min > 1e-12 * diag_max) return llt.solve(r);
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    return anchor + cod.solve(r - A * anchor);
}

}  // namespace

void BetaProblem::validate() const {
    if (H.rows() < 1 || H.cols() < 1) throw InvalidInput("beta problem needs q >= 1 rows and p >= 1 columns");
    if (k.size() != H.rows()) throw InvalidInput("beta problem: H and k row counts differ");
    if (!H.allFinite() || !k.allFinite()) throw InvalidInput("beta problem contains non-finite entries");
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw InvalidInput("beta ridge must be finite and >= 0");
    if (!(lower < upper) || !std::isfinite(lower) || !std::isfinite(upper))
        throw InvalidInput("beta bounds require lower < upper");
    if (anchor.size() != 0 && anchor.size() != H.cols())
        throw InvalidInput("beta anchor length does not match H columns");
    if (anchor.size() != 0 && !anchor.allFinite()) throw InvalidInput("beta anchor is non-finite");
}

Eigen::VectorXd BetaProblem::anchor_or_ones() const {
    return anchor.size() == 0 ? Eigen::VectorXd::Ones(H.cols()) : anchor;
}

double BetaProblem::objective(const Eigen::VectorXd& beta) const {
    const auto q = static_cast<double>(H.rows());
    return ((k - H * beta).squaredNorm() + ridge * (beta - anchor_or_ones()).squaredNorm()) /
           (2.0 * q);
}

Eigen::VectorXd BetaProblem::gradient(const Eigen::VectorXd& beta) const {
    const auto q = static_cast<double>(H.rows());
    return (H.transpose() * (H * beta - k) + ridge * (beta - anchor_or_ones())) / q;
}

BetaVector solve_beta_constrained(const BetaProblem& problem) {
    problem.validate();
    const Eigen::Index p = problem.H.cols();
    if (p > kMaxEnumeratedDims)
        throw InvalidInput("active-set enumeration supports at most " +
                           std::to_string(kMaxEnumeratedDims) + " coefficients");

    const Eigen::VectorXd anchor = problem.anchor_or_ones();
    Eigen::MatrixXd A = problem.H.transpose() * problem.H;
    A.diagonal().array() += problem.ridge;
    const Eigen::VectorXd c = problem.H.transpose() * problem.k + problem.ridge * anchor;

    Eigen::Index patterns = 1;
    for (Eigen::Index i = 0; i < p; ++i) patterns *= 3;

    const double slack = 1e-12 * (1.0 + std::abs(problem.upper) + std::abs(problem.lower));
    Eigen::VectorXd best;
    double best_obj = std::numeric_limits<double>::infinity();
    double best_dist = std::numeric_limits<double>::infinity();
    std::vector<Bound> state(static_cast<std::size_t>(p));

    for (Eigen::Index code = 0; code < patterns; ++code) {
        Eigen::Index rest = code;
        std::vector<Eigen::Index> free_idx;
        Eigen::VectorXd beta(p);
        for (Eigen::Index i = 0; i < p; ++i) {
            state[static_cast<std::size_t>(i)] = static_cast<Bound>(rest % 3);
            rest /= 3;
            switch (state[static_cast<std::size_t>(i)]) {
                case Bound::free: free_idx.push_back(i); beta[i] = 0.0; break;
                case Bound::lower: beta[i] = problem.lower; break;
                case Bound::upper: beta[i] = problem.upper; break;
            }
        }
        if (!free_idx.empty()) {
            // Stationarity on the free block with the bound block held fixed.
            Eigen::VectorXd fixed = beta;
            for (Eigen::Index i : free_idx) fixed[i] = 0.0;
            const Eigen::VectorXd r = (c - A * fixed)(free_idx);
            const Eigen::VectorXd sol = solve_nearest(A(free_idx, free_idx), r, anchor(free_idx));
            bool feasible = sol.allFinite();
            for (Eigen::Index j = 0; feasible && j < sol.size(); ++j) {
                if (sol[j] < problem.lower - slack || sol[j] > problem.upper + slack) feasible = false;
                beta[free_idx[static_cast<std::size_t>(j)]] =
                    std::clamp(sol[j], problem.lower, problem.upper);
            }
            if (!feasible) continue;
        }
        const double obj = problem.objective(beta);
        const double dist = (beta - anchor).squaredNorm();
        const double tie_tol = 1e-12 * (1.0 + std::abs(best_obj));
        if (obj < best_obj - tie_tol || (std::abs(obj - best_obj) <= tie_tol && dist < best_dist)) {
            best = beta;
            best_obj = obj;
            best_dist = dist;
        }
    }
    return BetaVector{best};
}

bool satisfies_kkt(const BetaProblem& problem, const Eigen::VectorXd& beta, double tol) {
    const Eigen::VectorXd g = problem.gradient(beta);
    const double edge = 1e-9 * (1.0 + std::abs(problem.upper));
    for (Eigen::Index i = 0; i < beta.size(); ++i) {
        if (beta[i] < problem.lower - edge || beta[i] > problem.upper + edge) return false;
        const bool at_lower = beta[i] <= problem.lower + edge;
        const bool at_upper = beta[i] >= problem.upper - edge;
        if (at_lower) {
            if (g[i] < -tol) return false;
        } else if (at_upper) {
            if (g[i] > tol) return false;
        } else if (std::abs(g[i]) > tol) {
            return false;
        }
    }
    return true;
}

LeastSquaresResult least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    if (A.rows() != b.size()) throw InvalidInput("least squares: row counts differ");
    if (A.rows() < 1 || A.cols() < 1) throw InvalidInput("least squares needs a non-empty design");
    if (!A.allFinite() || !b.allFinite()) throw InvalidInput("least squares input is non-finite");
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    LeastSquaresResult out;
    out.coefficients = cod.solve(b);
    out.rank = cod.rank();
    out.rank_deficient = out.rank < A.cols();
    return out;
}

OlsBeta solve_beta_ols(const Eigen::MatrixXd& H, const Eigen::VectorXd& k) {
    const LeastSquaresResult ls = least_squares(H, k);
    return OlsBeta{BetaVector{ls.coefficients}, ls.rank_deficient};
}

BetaRidgeSelection cv_select_beta_ridge(const BetaProblem& problem, std::span<const double> grid,
                                        int folds, std::uint64_t seed) {
    problem.validate();
    if (grid.empty()) throw InvalidInput("beta ridge grid is empty");
    BetaRidgeSelection out;
    if (grid.size() == 1) {
        out.ridge = grid.front();
        out.scores = {0.0};
        return out;
    }
    const Eigen::Index q = problem.H.rows();
    const std::vector<int> fold_of = make_folds(q, folds, seed);

    std::vector<double> sse(grid.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> train, test;
        for (Eigen::Index i = 0; i < q; ++i)
            (fold_of[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
        BetaProblem sub = problem;
        sub.H = problem.H(train, Eigen::all);
        sub.k = problem.k(train);
        const Eigen::MatrixXd H_test = problem.H(test, Eigen::all);
        const Eigen::VectorXd k_test = problem.k(test);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            sub.ridge = grid[g];
            const BetaVector b = solve_beta_constrained(sub);
            sse[g] += (k_test - H_test * b.values).squaredNorm();
        }
    }
    out.scores.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) out.scores[g] = sse[g] / static_cast<double>(q);
    const double floor = problem.k.squaredNorm() / static_cast<double>(q);
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
        const double a = out.scores[g];
        const double b = out.scores[best];
        const bool tie = std::abs(a - b) <= 1e-12 * std::max({std::abs(a), std::abs(b), floor});
        if (a < b && !tie) best = g;
        else if (tie && grid[g] > grid[best]) best = g;
    }
    out.ridge = grid[best];
    return out;
}

}  // namespace sdd
