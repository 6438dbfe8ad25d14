#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdd/constrained_solver.hpp"
#include "sdd/kernel_regression.hpp"
#include "sdd/panel.hpp"

namespace sdd {

enum class CateKind { sdd, cdd, two_step, olt, obs, rct, sdd_no_pre, sdd_ols };

inline constexpr std::array<CateKind, 8> kAllCateKinds = {
    CateKind::sdd, CateKind::cdd,        CateKind::two_step, CateKind::olt,
    CateKind::obs, CateKind::rct, CateKind::sdd_no_pre, CateKind::sdd_ols};

/// Machine name: "sdd", "two_step", "sdd_no_pre", ...
std::string_view kind_name(CateKind k) noexcept;
/// Table label: "SDD", "2Step", "-PRE", ...
std::string_view display_name(CateKind k) noexcept;
/// Accepts either form, case-insensitive. Throws InvalidInput.
CateKind parse_kind(std::string_view name);
/// Ablations are reported below the main roster.
constexpr bool is_ablation(CateKind k) noexcept {
    return k == CateKind::sdd_no_pre || k == CateKind::sdd_ols;
}
constexpr bool uses_rct(CateKind k) noexcept {
    return k != CateKind::cdd && k != CateKind::obs;
}

/// What the 2Step and OLT baselines regress on over the trial rows.
enum class RctSignal {
    shared_fit,           ///< the same two-arm kernel fit SDD uses
    transformed_outcome,  ///< y * (t/e - (1-t)/(1-e)), e = treated fraction
};

struct EstimatorConfig {
    KernelSpec kernel;  ///< bounds are fitted per regression
    std::vector<double> ridge_grid = default_ridge_grid();
    std::vector<double> beta_ridge_grid = default_ridge_grid();
    int folds = 5;
    std::uint64_t seed = 0;
    double beta_lower = 0.0;
    double beta_upper = 3.0;
    RctSignal baseline_signal = RctSignal::shared_fit;
};

using RegressorPtr = std::shared_ptr<const KernelRegressor>;

/// The four fitted cell means: mu11 = E(Y|X,T=1,M=1), h1 = E(Y|X,T=1,M=0),
/// h2 = E(Y|X,T=0,M=1), h3 = E(Y|X,T=0,M=0). Unneeded entries may be null.
struct ComponentSet {
    RegressorPtr mu11;
    RegressorPtr h1;
    RegressorPtr h2;
    RegressorPtr h3;

    [[nodiscard]] const RegressorPtr& of(Cell c) const;
    /// Rows of [-h1(x), -h2(x), +h3(x)].
    [[nodiscard]] Eigen::MatrixXd adjustment_matrix(const Eigen::MatrixXd& X) const;
};

/// Per-arm fits on trial data. evaluate() = treated(x) - control(x).
struct RctFit {
    RegressorPtr treated;
    RegressorPtr control;

    [[nodiscard]] Eigen::VectorXd evaluate(const Eigen::MatrixXd& X) const;
};

struct FitDiagnostics {
    std::vector<std::pair<std::string, double>> ridges;  ///< per regression, CV-selected
    std::optional<double> beta_ridge;
    bool rank_warning = false;
};

/// A fitted CATE estimate of one kind. Immutable once built; shares regressors.
struct CateModel {
    CateKind kind = CateKind::sdd;
    Eigen::Index dims = 0;
    ComponentSet components;
    std::optional<RctFit> rct_fit;
    std::optional<BetaVector> beta;
    std::optional<std::pair<Eigen::VectorXd, double>> linear_correction;  ///< (theta, phi)
    std::optional<std::pair<double, double>> affine_correction;          ///< (alpha, delta)
    FitDiagnostics diagnostics;

    [[nodiscard]] Eigen::VectorXd evaluate(const Eigen::MatrixXd& X) const;
};

[[nodiscard]] Eigen::VectorXd evaluate_cate(const CateModel& model, const Eigen::MatrixXd& X);

/// Lazily fits and memoizes every regression one (observational, RCT) pair needs, so
/// several estimators built from the same data share their component fits. Each
/// regression draws its CV seed from (cfg.seed, regression name), which makes a fit
/// here identical to the same fit made by a standalone `fit_*` call.
///
/// Not thread-safe; use one cache per thread.
class FitCache {
public:
    FitCache(const PanelDataset& obs, const PanelDataset* rct, EstimatorConfig cfg);

    [[nodiscard]] const RegressorPtr& cell(Cell c);
    [[nodiscard]] const RctFit& rct();
    [[nodiscard]] ComponentSet components();

    [[nodiscard]] CateModel fit(CateKind kind);

private:
    [[nodiscard]] const PanelDataset& rct_data() const;
    [[nodiscard]] CateModel fit_sdd_family(CateKind kind);
    [[nodiscard]] CateModel fit_baseline(CateKind kind);
    [[nodiscard]] Eigen::VectorXd baseline_target();
    [[nodiscard]] FitDiagnostics base_diagnostics(CateKind kind) const;

    const PanelDataset& obs_;
    const PanelDataset* rct_;
    EstimatorConfig cfg_;
    std::array<RegressorPtr, 4> cells_{};
    std::optional<RctFit> rct_fit_;
};

[[nodiscard]] CateModel fit_rct_cate(const PanelDataset& rct, const EstimatorConfig& cfg);
[[nodiscard]] ComponentSet fit_components(const PanelDataset& obs, const EstimatorConfig& cfg);
[[nodiscard]] CateModel fit_sdd(const PanelDataset& obs, const PanelDataset& rct,
                                const EstimatorConfig& cfg);
[[nodiscard]] CateModel fit_cdd(const PanelDataset& obs, const EstimatorConfig& cfg);
[[nodiscard]] CateModel fit_two_step(const PanelDataset& obs, const PanelDataset& rct,
                                     const EstimatorConfig& cfg);
[[nodiscard]] CateModel fit_olt(const PanelDataset& obs, const PanelDataset& rct,
                                const EstimatorConfig& cfg);
[[nodiscard]] CateModel fit_obs_only(const PanelDataset& obs, const EstimatorConfig& cfg);
[[nodiscard]] CateModel fit_sdd_no_pre(const PanelDataset& obs, const PanelDataset& rct,
                                       const EstimatorConfig& cfg);
[[nodiscard]] CateModel fit_sdd_ols(const PanelDataset& obs, const PanelDataset& rct,
                                    const EstimatorConfig& cfg);

/// Dispatch by kind. `rct` may be null for kinds that ignore trial data.
[[nodiscard]] CateModel fit_estimator(CateKind kind, const PanelDataset& obs,
                                      const PanelDataset* rct, const EstimatorConfig& cfg);

/// SDD evaluation with a caller-supplied beta (three weights).
[[nodiscard]] CateModel make_sdd_model(const ComponentSet& components, const BetaVector& beta);
[[nodiscard]] CateModel make_cdd_model(const ComponentSet& components);

}  // namespace sdd
