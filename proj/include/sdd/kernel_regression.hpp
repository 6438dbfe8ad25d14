#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sdd {

enum class KernelKind { ink_spline_deg1, rbf };

/// How the per-dimension INK-spline kernels are joined into a multivariate kernel.
enum class KernelCombine { sum, product };

/// Kernel family plus the affine map that takes every input dimension onto [0, 1].
///
/// Empty `input_lo`/`input_hi` mean "not yet bounded"; `fit_krr` fills them from the
/// training rows. Inputs that fall outside the bounds are clamped after rescaling, so
/// a fitted model extrapolates with a flat continuation of its boundary values.
struct KernelSpec {
    KernelKind kind = KernelKind::ink_spline_deg1;
    KernelCombine combine = KernelCombine::product;
    double rbf_bandwidth = 0.5;  ///< in rescaled units; only read when kind == rbf
    Eigen::VectorXd input_lo;
    Eigen::VectorXd input_hi;

    [[nodiscard]] bool bounded() const noexcept { return input_lo.size() > 0; }
    [[nodiscard]] Eigen::Index dims() const noexcept { return input_lo.size(); }

    /// Throws InvalidInput unless the spec is bounded and every invariant holds.
    void validate() const;

    /// Copy of this spec with bounds set to the per-column min/max of `X`.
    /// A column with zero spread gets the unit interval centred on its value.
    [[nodiscard]] KernelSpec bounded_to(const Eigen::MatrixXd& X) const;

    /// Rows of `X` mapped onto [0, 1]^d, clamped.
    [[nodiscard]] Eigen::MatrixXd rescale(const Eigen::MatrixXd& X) const;
};

/// First-degree INK-spline kernel on [0, 1].
[[nodiscard]] double ink_spline_deg1(double a, double b) noexcept;

/// Kernel value between two raw (unscaled) points.
[[nodiscard]] double kernel_eval(const KernelSpec& spec, std::span<const double> u,
                                 std::span<const double> v);

/// Kernel between rows of two already-rescaled matrices: K(i, j) = k(A_i, B_j).
[[nodiscard]] Eigen::MatrixXd kernel_matrix_scaled(const KernelSpec& spec,
                                                   const Eigen::MatrixXd& A,
                                                   const Eigen::MatrixXd& B);

/// Gram matrix of the raw rows of `X`.
[[nodiscard]] Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X);

/// A fitted kernel ridge regression h(x) = sum_i w_i k(x_i, x). Immutable.
class KernelRegressor {
public:
    KernelRegressor(KernelSpec spec, Eigen::MatrixXd train_inputs, Eigen::VectorXd dual_weights,
                    double ridge);

    [[nodiscard]] const KernelSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const Eigen::MatrixXd& train_inputs() const noexcept { return train_inputs_; }
    [[nodiscard]] const Eigen::VectorXd& dual_weights() const noexcept { return dual_weights_; }
    [[nodiscard]] double ridge() const noexcept { return ridge_; }
    [[nodiscard]] Eigen::Index dims() const noexcept { return train_inputs_.cols(); }

    [[nodiscard]] Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

private:
    KernelSpec spec_;
    Eigen::MatrixXd train_inputs_;
    Eigen::MatrixXd scaled_inputs_;
    Eigen::VectorXd dual_weights_;
    double ridge_;
};

/// Solves (G + n * ridge * I) w = y. An unbounded spec is bounded to `X` first.
///
/// At ridge == 0 a failed factorization is retried once with ridge 1e-10; if the
/// jittered solution does not interpolate `y`, NumericalRankError is thrown.
[[nodiscard]] KernelRegressor fit_krr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      const KernelSpec& spec, double ridge);

[[nodiscard]] Eigen::VectorXd predict(const KernelRegressor& model, const Eigen::MatrixXd& X);

/// {1e-8, 1e-7, ..., 1e-1}.
[[nodiscard]] std::vector<double> default_ridge_grid();

/// Fold index of every row: a seeded shuffle dealt round-robin into `folds` groups.
[[nodiscard]] std::vector<int> make_folds(Eigen::Index n, int folds, std::uint64_t seed);

struct RidgeSelection {
    double ridge = 0.0;
    std::vector<double> scores;  ///< mean held-out squared error, one per grid entry
};

/// K-fold cross-validation over `grid`. Scores within 1e-12 of each other, relative to
/// the larger score or the mean squared target, tie and go to the larger ridge.
[[nodiscard]] RidgeSelection cv_ridge_scores(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                             const KernelSpec& spec, std::span<const double> grid,
                                             int folds, std::uint64_t seed);

[[nodiscard]] double cv_select_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                     const KernelSpec& spec, std::span<const double> grid,
                                     int folds, std::uint64_t seed);

/// Bounds the spec to `X`, selects the ridge by CV, refits on all rows.
[[nodiscard]] KernelRegressor fit_krr_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                         const KernelSpec& spec, std::span<const double> grid,
                                         int folds, std::uint64_t seed);

}  // namespace sdd
