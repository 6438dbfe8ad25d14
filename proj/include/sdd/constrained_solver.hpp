#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sdd {

/// Weights on the adjustable components of the difference-in-differences estimand.
struct BetaVector {
    Eigen::VectorXd values;

    [[nodiscard]] Eigen::Index size() const noexcept { return values.size(); }
    [[nodiscard]] double operator[](Eigen::Index i) const { return values[i]; }
};

/// Anchored, box-constrained least squares
///
///     minimize   1/(2q) |k - H b|^2 + ridge/(2q) |b - anchor|^2
///     subject to lower <= b <= upper
///
/// with q = rows of H. Only small p (p <= 3 in practice) is supported.
struct BetaProblem {
    Eigen::MatrixXd H;
    Eigen::VectorXd k;
    double ridge = 0.0;
    double lower = 0.0;
    double upper = 3.0;
    Eigen::VectorXd anchor;  ///< empty means all ones

    void validate() const;
    [[nodiscard]] Eigen::VectorXd anchor_or_ones() const;
    [[nodiscard]] double objective(const Eigen::VectorXd& beta) const;
    /// Gradient of `objective`.
    [[nodiscard]] Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const;
};

/// Exact minimizer by enumeration of all 3^p free/lower/upper assignments.
/// When the minimizer is not unique (ridge == 0, singular H^T H), returns the one
/// closest to the anchor.
[[nodiscard]] BetaVector solve_beta_constrained(const BetaProblem& problem);

/// True when `beta` satisfies the first-order optimality conditions at `tol`.
[[nodiscard]] bool satisfies_kkt(const BetaProblem& problem, const Eigen::VectorXd& beta,
                                 double tol = 1e-6);

struct LeastSquaresResult {
    Eigen::VectorXd coefficients;
    Eigen::Index rank = 0;
    bool rank_deficient = false;
};

/// Minimum-norm least squares solution of A x = b via complete orthogonal decomposition.
[[nodiscard]] LeastSquaresResult least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

struct OlsBeta {
    BetaVector beta;
    bool rank_deficient = false;
};

/// Unconstrained, unanchored (H^T H)^-1 H^T k. Entries may leave [0, 3].
[[nodiscard]] OlsBeta solve_beta_ols(const Eigen::MatrixXd& H, const Eigen::VectorXd& k);

struct BetaRidgeSelection {
    double ridge = 0.0;
    std::vector<double> scores;  ///< held-out mean |k - H b|^2 per grid entry
};

/// K-fold CV of the anchor ridge. The score is the held-out residual only; the
/// anchor penalty is not scored. Ties go to the larger ridge.
[[nodiscard]] BetaRidgeSelection cv_select_beta_ridge(const BetaProblem& problem,
                                                      std::span<const double> grid, int folds,
                                                      std::uint64_t seed);

}  // namespace sdd
