#include "sdd/kernel_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "sdd/error.hpp"

namespace sdd {
namespace {

constexpr double kZeroRidgeJitter = 1e-10;

void require_finite(const Eigen::MatrixXd& M, const char* what) {
    if (!M.allFinite()) throw InvalidInput(std::string(what) + " contains non-finite values");
}

double rbf(const KernelSpec& spec, const double* a, const double* b, Eigen::Index d) {
    double sq = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double diff = a[j] - b[j];
        sq += diff * diff;
    }
    return std::exp(-sq / (2.0 * spec.rbf_bandwidth * spec.rbf_bandwidth));
}

// a, b point at rescaled coordinates.
double kernel_scaled(const KernelSpec& spec, const double* a, const double* b, Eigen::Index d) {
    if (spec.kind == KernelKind::rbf) return rbf(spec, a, b, d);
    if (spec.combine == KernelCombine::sum) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) s += ink_spline_deg1(a[j], b[j]);
        return s;
    }
    double p = 1.0;
    for (Eigen::Index j = 0; j < d; ++j) p *= ink_spline_deg1(a[j], b[j]);
    return p;
}

// Solves (G + shift * I) w = y by Cholesky, falling back to pivoted LDLT.
bool solve_shifted(const Eigen::MatrixXd& G, double shift, const Eigen::VectorXd& y,
                   Eigen::VectorXd& w) {
    Eigen::MatrixXd A = G;
    A.diagonal().array() += shift;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) {
        w = llt.solve(y);
        if (w.allFinite()) return true;
    }
    if (shift > 0.0) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
        if (ldlt.info() == Eigen::Success) {
            w = ldlt.solve(y);
            return w.allFinite();
        }
    }
    return false;
}

}  // namespace

void KernelSpec::validate() const {
    if (!bounded()) throw InvalidInput("kernel spec has no input bounds");
    if (input_hi.size() != input_lo.size())
        throw InvalidInput("kernel spec bounds have mismatched dimensions");
    for (Eigen::Index j = 0; j < input_lo.size(); ++j) {
        if (!std::isfinite(input_lo[j]) || !std::isfinite(input_hi[j]) ||
            !(input_lo[j] < input_hi[j]))
            throw InvalidInput("kernel spec requires input_lo < input_hi in dimension " +
                               std::to_string(j));
    }
    if (kind == KernelKind::rbf && !(rbf_bandwidth > 0.0 && std::isfinite(rbf_bandwidth)))
        throw InvalidInput("rbf kernel requires a positive bandwidth");
}

KernelSpec KernelSpec::bounded_to(const Eigen::MatrixXd& X) const {
    if (X.rows() == 0 || X.cols() == 0) throw InvalidInput("cannot bound a kernel to empty data");
    require_finite(X, "covariates");
    KernelSpec out = *this;
    out.input_lo = X.colwise().minCoeff().transpose();
    out.input_hi = X.colwise().maxCoeff().transpose();
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        if (out.input_hi[j] - out.input_lo[j] <= 1e-12 * (1.0 + std::abs(out.input_lo[j]))) {
            const double centre = out.input_lo[j];
            out.input_lo[j] = centre - 0.5;
            out.input_hi[j] = centre + 0.5;
        }
    }
    return out;
}

Eigen::MatrixXd KernelSpec::rescale(const Eigen::MatrixXd& X) const {
    if (X.cols() != dims())
        throw InvalidInput("input has " + std::to_string(X.cols()) +
                           " columns, kernel expects " + std::to_string(dims()));
    Eigen::MatrixXd out(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double lo = input_lo[j];
        const double width = input_hi[j] - lo;
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            out(i, j) = std::clamp((X(i, j) - lo) / width, 0.0, 1.0);
    }
    return out;
}

double ink_spline_deg1(double a, double b) noexcept {
    const double m = std::min(a, b);
    return 1.0 + a * b + a * b * m - 0.5 * (a + b) * m * m + m * m * m / 3.0;
}

double kernel_eval(const KernelSpec& spec, std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size() || u.empty())
        throw InvalidInput("kernel_eval needs two points of equal, non-zero dimension");
    spec.validate();
    if (static_cast<Eigen::Index>(u.size()) != spec.dims())
        throw InvalidInput("point dimension does not match kernel bounds");
    const auto d = static_cast<Eigen::Index>(u.size());
    Eigen::MatrixXd P(2, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        P(0, j) = u[static_cast<std::size_t>(j)];
        P(1, j) = v[static_cast<std::size_t>(j)];
    }
    if (!P.allFinite()) throw InvalidInput("kernel_eval inputs must be finite");
    const Eigen::MatrixXd S = spec.rescale(P);
    const Eigen::RowVectorXd a = S.row(0);
    const Eigen::RowVectorXd b = S.row(1);
    return kernel_scaled(spec, a.data(), b.data(), d);
}

Eigen::MatrixXd kernel_matrix_scaled(const KernelSpec& spec, const Eigen::MatrixXd& A,
                                     const Eigen::MatrixXd& B) {
    if (A.cols() != B.cols()) throw InvalidInput("kernel matrix operands differ in dimension");
    const Eigen::Index d = A.cols();
    // Row-major copies keep each point contiguous.
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const RowMajor Ar = A;
    const RowMajor Br = B;
    Eigen::MatrixXd K(A.rows(), B.rows());
    for (Eigen::Index j = 0; j < B.rows(); ++j)
        for (Eigen::Index i = 0; i < A.rows(); ++i)
            K(i, j) = kernel_scaled(spec, Ar.row(i).data(), Br.row(j).data(), d);
    return K;
}

Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X) {
    spec.validate();
    require_finite(X, "covariates");
    const Eigen::MatrixXd S = spec.rescale(X);
    const Eigen::Index n = S.rows();
    const Eigen::Index d = S.cols();
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const RowMajor Sr = S;
    Eigen::MatrixXd G(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j; i < n; ++i) {
            const double k = kernel_scaled(spec, Sr.row(i).data(), Sr.row(j).data(), d);
            G(i, j) = k;
            G(j, i) = k;
        }
    }
    return G;
}

KernelRegressor::KernelRegressor(KernelSpec spec, Eigen::MatrixXd train_inputs,
                                 Eigen::VectorXd dual_weights, double ridge)
    : spec_(std::move(spec)),
      train_inputs_(std::move(train_inputs)),
      dual_weights_(std::move(dual_weights)),
      ridge_(ridge) {
    if (train_inputs_.rows() == 0) throw InvalidInput("kernel regressor needs training inputs");
    if (dual_weights_.size() != train_inputs_.rows())
        throw InvalidInput("dual weight count does not match training rows");
    if (!(ridge_ >= 0.0)) throw InvalidInput("ridge must be non-negative");
    spec_.validate();
    scaled_inputs_ = spec_.rescale(train_inputs_);
}

Eigen::VectorXd KernelRegressor::predict(const Eigen::MatrixXd& X) const {
    if (X.cols() != dims())
        throw InvalidInput("prediction input has " + std::to_string(X.cols()) +
                           " columns, model expects " + std::to_string(dims()));
    require_finite(X, "prediction input");
    const Eigen::MatrixXd K = kernel_matrix_scaled(spec_, spec_.rescale(X), scaled_inputs_);
    return K * dual_weights_;
}

KernelRegressor fit_krr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KernelSpec& spec,
                        double ridge) {
    if (X.rows() < 1 || X.cols() < 1) throw InvalidInput("fit_krr needs at least one row and column");
    if (y.size() != X.rows()) throw InvalidInput("fit_krr: target length does not match rows");
    require_finite(X, "covariates");
    require_finite(y, "targets");
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw InvalidInput("ridge must be finite and >= 0");

    const KernelSpec bounded = spec.bounded() ? spec : spec.bounded_to(X);
    const Eigen::MatrixXd G = gram_matrix(bounded, X);
    const auto n = static_cast<double>(X.rows());

    const auto interpolates = [&](const Eigen::VectorXd& w) {
        return (G * w - y).norm() <= 1e-6 * std::max(1.0, y.norm());
    };
    Eigen::VectorXd w;
    if (solve_shifted(G, n * ridge, y, w) && (ridge > 0.0 || interpolates(w)))
        return {bounded, X, std::move(w), ridge};
    if (ridge == 0.0 && solve_shifted(G, n * kZeroRidgeJitter, y, w) && interpolates(w))
        return {bounded, X, std::move(w), ridge};
    throw NumericalRankError("kernel system is numerically singular at ridge " +
                             std::to_string(ridge) + "; use a ridge > 0");
}

Eigen::VectorXd predict(const KernelRegressor& model, const Eigen::MatrixXd& X) {
    return model.predict(X);
}

std::vector<double> default_ridge_grid() {
    return {1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
}

std::vector<int> make_folds(Eigen::Index n, int folds, std::uint64_t seed) {
    if (folds < 2) throw InvalidInput("cross-validation needs at least 2 folds");
    if (n < folds) throw InvalidInput("cross-validation needs at least as many rows as folds");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold_of(static_cast<std::size_t>(n));
    for (std::size_t pos = 0; pos < order.size(); ++pos)
        fold_of[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(folds));
    return fold_of;
}

RidgeSelection cv_ridge_scores(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const KernelSpec& spec, std::span<const double> grid, int folds,
                               std::uint64_t seed) {
    if (grid.empty()) throw InvalidInput("ridge grid is empty");
    for (double g : grid)
        if (!(g >= 0.0) || !std::isfinite(g)) throw InvalidInput("ridge grid entries must be >= 0");
    if (y.size() != X.rows()) throw InvalidInput("cv: target length does not match rows");
    require_finite(y, "targets");
    const std::vector<int> fold_of = make_folds(X.rows(), folds, seed);

    const KernelSpec bounded = spec.bounded() ? spec : spec.bounded_to(X);
    const Eigen::MatrixXd G = gram_matrix(bounded, X);

    std::vector<double> sse(grid.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> train, test;
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            (fold_of[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
        const Eigen::MatrixXd G_train = G(train, train);
        const Eigen::MatrixXd K_test = G(test, train);
        const Eigen::VectorXd y_train = y(train);
        const Eigen::VectorXd y_test = y(test);
        const auto n_train = static_cast<double>(train.size());
        for (std::size_t g = 0; g < grid.size(); ++g) {
            Eigen::VectorXd w;
            if (!solve_shifted(G_train, n_train * grid[g], y_train, w)) {
                sse[g] = std::numeric_limits<double>::infinity();
                continue;
            }
            sse[g] += (K_test * w - y_test).squaredNorm();
        }
    }

    RidgeSelection out;
    out.scores.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g)
        out.scores[g] = sse[g] / static_cast<double>(X.rows());

    const double floor = y.squaredNorm() / static_cast<double>(X.rows());
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
        const double a = out.scores[g];
        const double b = out.scores[best];
        const bool tie = std::abs(a - b) <= 1e-12 * std::max({std::abs(a), std::abs(b), floor});
        if (a < b && !tie) best = g;
        else if (tie && grid[g] > grid[best]) best = g;
    }
    if (!std::isfinite(out.scores[best]))
        throw NumericalRankError("no ridge in the grid gives a solvable kernel system");
    out.ridge = grid[best];
    return out;
}

double cv_select_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KernelSpec& spec,
                       std::span<const double> grid, int folds, std::uint64_t seed) {
    if (grid.size() == 1) {
        if (X.rows() < folds) throw InvalidInput("cross-validation needs at least as many rows as folds");
        return grid.front();
    }
    return cv_ridge_scores(X, y, spec, grid, folds, seed).ridge;
}

KernelRegressor fit_krr_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const KernelSpec& spec, std::span<const double> grid, int folds,
                           std::uint64_t seed) {
    const KernelSpec bounded = spec.bounded() ? spec : spec.bounded_to(X);
    const double ridge = cv_select_ridge(X, y, bounded, grid, folds, seed);
    return fit_krr(X, y, bounded, ridge);
}

}  // namespace sdd
