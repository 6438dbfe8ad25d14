#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

#include "sdd/constrained_solver.hpp"
#include "sdd/panel.hpp"

namespace sdd {

using Rng = std::mt19937_64;

/// Post-nonlinear cell-mean shapes, each a function of Z = sum_i x_i.
enum class MeanFunction { linear, z_phi, gaussian_bump, tanh };

inline constexpr std::array<MeanFunction, 4> kAllMeanFunctions = {
    MeanFunction::linear, MeanFunction::z_phi, MeanFunction::gaussian_bump, MeanFunction::tanh};

std::string_view mean_function_name(MeanFunction f) noexcept;

/// Z, Z * Phi(Z), exp(-Z^2) or tanh(Z).
[[nodiscard]] double apply_mean_function(MeanFunction f, double z) noexcept;

/// Z = x_1 + ... + x_d, summed left to right.
[[nodiscard]] double covariate_index(const Eigen::Ref<const Eigen::RowVectorXd>& x) noexcept;

/// Standard normal CDF.
[[nodiscard]] double standard_normal_cdf(double z) noexcept;

struct DgpConfig {
    int dims = 3;
    int n_obs = 1000;          ///< split evenly over the four (T, M) cells
    int m_rct_per_arm = 50;
    double exclusion_rate = 0.0;  ///< fraction in [0, 1); trial X1 ~ U(-1 + 2r, 1)
    double noise_variance = 0.1;
    double beta_lo = 0.5;
    double beta_hi = 1.5;
    std::uint64_t seed = 0;

    void validate() const;
};

/// The drawn cell means and slope weights of one synthetic problem.
struct GroundTruth {
    std::array<MeanFunction, 4> mean_fns{};  ///< indexed by cell_index(Cell)
    BetaVector beta_true;

    [[nodiscard]] double cell_mean_at(Cell c, const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    [[nodiscard]] Eigen::VectorXd cell_mean(Cell c, const Eigen::MatrixXd& X) const;

    /// [mu11 - mu01 b1] - [mu10 b2 - mu00 b3], where mu_MT is the mean of cell (T, M).
    [[nodiscard]] double cate_at(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    [[nodiscard]] Eigen::VectorXd cate(const Eigen::MatrixXd& X) const;
};

[[nodiscard]] GroundTruth draw_ground_truth(const DgpConfig& cfg, Rng& rng);

/// n_obs / 4 rows per cell in kAllCells order, x ~ U(-1, 1)^d,
/// y = cell mean + N(0, noise_variance).
[[nodiscard]] PanelDataset gen_observational(const GroundTruth& truth, const DgpConfig& cfg, Rng& rng);

/// m_rct_per_arm treated rows followed by as many control rows, all at timepoint 1.
[[nodiscard]] PanelDataset gen_rct(const GroundTruth& truth, const DgpConfig& cfg, Rng& rng);

struct SyntheticProblem {
    GroundTruth truth;
    PanelDataset obs;
    PanelDataset rct;
};

/// Truth, observational panel and trial drawn in that order from Rng(cfg.seed).
[[nodiscard]] SyntheticProblem draw_problem(const DgpConfig& cfg);

}  // namespace sdd
