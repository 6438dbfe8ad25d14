#include "sdd/estimators.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "sdd/error.hpp"
#include "sdd/seeding.hpp"

namespace sdd {
namespace {

void log_ridge(FitDiagnostics& diag, std::string name, const RegressorPtr& r) {
    if (r) diag.ridges.emplace_back(std::move(name), r->ridge());
}

std::string cell_fit_name(Cell c) { return "obs " + std::string(cell_label(c)); }

const KernelRegressor& require(const RegressorPtr& p, const char* what) {
    if (!p) throw InvalidInput(std::string("model is missing its ") + what + " regression");
    return *p;
}

void check_dims(const CateModel& model, const Eigen::MatrixXd& X) {
    if (X.cols() != model.dims)
        throw InvalidInput("evaluation points have " + std::to_string(X.cols()) +
                           " columns, model expects " + std::to_string(model.dims));
}

}  // namespace

std::string_view kind_name(CateKind k) noexcept {
    switch (k) {
        case CateKind::sdd: return "sdd";
        case CateKind::cdd: return "cdd";
        case CateKind::two_step: return "two_step";
        case CateKind::olt: return "olt";
        case CateKind::obs: return "obs";
        case CateKind::rct: return "rct";
        case CateKind::sdd_no_pre: return "sdd_no_pre";
        case CateKind::sdd_ols: return "sdd_ols";
    }
    return "?";
}

std::string_view display_name(CateKind k) noexcept {
    switch (k) {
        case CateKind::sdd: return "SDD";
        case CateKind::cdd: return "CDD";
        case CateKind::two_step: return "2Step";
        case CateKind::olt: return "OLT";
        case CateKind::obs: return "OBS";
        case CateKind::rct: return "RCT";
        case CateKind::sdd_no_pre: return "-PRE";
        case CateKind::sdd_ols: return "-CON";
    }
    return "?";
}

CateKind parse_kind(std::string_view name) {
    std::string lowered(name);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (CateKind k : kAllCateKinds) {
        std::string disp(display_name(k));
        std::transform(disp.begin(), disp.end(), disp.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (lowered == kind_name(k) || lowered == disp) return k;
    }
    if (lowered == "2step") return CateKind::two_step;
    if (lowered == "pre" || lowered == "no_pre") return CateKind::sdd_no_pre;
    if (lowered == "con" || lowered == "ols") return CateKind::sdd_ols;
    throw InvalidInput("unknown estimator '" + std::string(name) + "'");
}

const RegressorPtr& ComponentSet::of(Cell c) const {
    switch (c) {
        case Cell::treated_post: return mu11;
        case Cell::treated_pre: return h1;
        case Cell::control_post: return h2;
        case Cell::control_pre: return h3;
    }
    return mu11;
}

Eigen::MatrixXd ComponentSet::adjustment_matrix(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd H(X.rows(), 3);
    H.col(0) = -require(h1, "T=1,M=0").predict(X);
    H.col(1) = -require(h2, "T=0,M=1").predict(X);
    H.col(2) = require(h3, "T=0,M=0").predict(X);
    return H;
}

Eigen::VectorXd RctFit::evaluate(const Eigen::MatrixXd& X) const {
    return require(treated, "RCT treated-arm").predict(X) -
           require(control, "RCT control-arm").predict(X);
}

Eigen::VectorXd CateModel::evaluate(const Eigen::MatrixXd& X) const {
    check_dims(*this, X);
    const auto post_contrast = [&] {
        return Eigen::VectorXd(require(components.mu11, "T=1,M=1").predict(X) -
                               require(components.h2, "T=0,M=1").predict(X));
    };
    switch (kind) {
        case CateKind::rct:
            if (!rct_fit) throw InvalidInput("rct model has no trial fit");
            return rct_fit->evaluate(X);
        case CateKind::cdd:
            return require(components.mu11, "T=1,M=1").predict(X) -
                   require(components.h1, "T=1,M=0").predict(X) -
                   require(components.h2, "T=0,M=1").predict(X) +
                   require(components.h3, "T=0,M=0").predict(X);
        case CateKind::sdd:
        case CateKind::sdd_ols:
            if (!beta || beta->size() != 3) throw InvalidInput("sdd model needs three beta weights");
            return require(components.mu11, "T=1,M=1").predict(X) +
                   components.adjustment_matrix(X) * beta->values;
        case CateKind::sdd_no_pre:
            if (!beta || beta->size() != 1) throw InvalidInput("-PRE model needs one beta weight");
            return require(components.mu11, "T=1,M=1").predict(X) -
                   require(components.h2, "T=0,M=1").predict(X) * beta->values[0];
        case CateKind::obs:
            return post_contrast();
        case CateKind::two_step: {
            if (!linear_correction) throw InvalidInput("2Step model has no linear correction");
            const auto& [theta, phi] = *linear_correction;
            return post_contrast() + X * theta + Eigen::VectorXd::Constant(X.rows(), phi);
        }
        case CateKind::olt: {
            if (!affine_correction) throw InvalidInput("OLT model has no affine correction");
            const auto [alpha, delta] = *affine_correction;
            return (post_contrast() * alpha).array() + delta;
        }
    }
    throw InvalidInput("unknown model kind");
}

Eigen::VectorXd evaluate_cate(const CateModel& model, const Eigen::MatrixXd& X) {
    return model.evaluate(X);
}

FitCache::FitCache(const PanelDataset& obs, const PanelDataset* rct, EstimatorConfig cfg)
    : obs_(obs), rct_(rct), cfg_(std::move(cfg)) {
    if (cfg_.folds < 2) throw InvalidInput("folds must be >= 2");
    if (!(cfg_.beta_lower < cfg_.beta_upper)) throw InvalidInput("beta bounds require lower < upper");
}

const PanelDataset& FitCache::rct_data() const {
    if (!rct_) throw InvalidInput("this estimator needs RCT data");
    return *rct_;
}

const RegressorPtr& FitCache::cell(Cell c) {
    RegressorPtr& slot = cells_[cell_index(c)];
    if (slot) return slot;
    obs_.validate();
    const std::vector<Eigen::Index> idx = obs_.rows_where(c);
    const std::string label(cell_label(c));
    if (idx.empty()) throw InsufficientData("observational cell " + label + " has no rows");
    if (static_cast<int>(idx.size()) < cfg_.folds)
        throw InsufficientData("observational cell " + label + " has fewer rows than CV folds");
    const Eigen::MatrixXd X = obs_.covariates(idx, Eigen::all);
    const Eigen::VectorXd y = obs_.outcome(idx);
    slot = std::make_shared<const KernelRegressor>(fit_krr_cv(
        X, y, cfg_.kernel, cfg_.ridge_grid, cfg_.folds, derive_seed(cfg_.seed, "cell/" + label)));
    return slot;
}

const RctFit& FitCache::rct() {
    if (rct_fit_) return *rct_fit_;
    const PanelDataset& trial = rct_data();
    trial.validate_rct();
    if (trial.dims() != obs_.dims() && obs_.rows() > 0)
        throw InvalidInput("RCT and observational covariate dimensions differ");
    RctFit fit;
    for (int arm : {1, 0}) {
        const std::vector<Eigen::Index> idx = trial.rows_where(arm, 1);
        const std::string name = arm == 1 ? "treated" : "control";
        if (idx.empty()) throw InsufficientData("RCT " + name + " arm has no rows");
        if (static_cast<int>(idx.size()) < cfg_.folds)
            throw InsufficientData("RCT " + name + " arm has fewer rows than CV folds");
        const Eigen::MatrixXd X = trial.covariates(idx, Eigen::all);
        const Eigen::VectorXd y = trial.outcome(idx);
        auto model = std::make_shared<const KernelRegressor>(fit_krr_cv(
            X, y, cfg_.kernel, cfg_.ridge_grid, cfg_.folds, derive_seed(cfg_.seed, "rct/" + name)));
        (arm == 1 ? fit.treated : fit.control) = std::move(model);
    }
    rct_fit_ = std::move(fit);
    return *rct_fit_;
}

ComponentSet FitCache::components() {
    return ComponentSet{cell(Cell::treated_post), cell(Cell::treated_pre),
                        cell(Cell::control_post), cell(Cell::control_pre)};
}

FitDiagnostics FitCache::base_diagnostics(CateKind kind) const {
    FitDiagnostics diag;
    if (uses_rct(kind) && rct_fit_) {
        log_ridge(diag, "rct treated", rct_fit_->treated);
        log_ridge(diag, "rct control", rct_fit_->control);
    }
    const bool all_cells =
        kind == CateKind::sdd || kind == CateKind::sdd_ols || kind == CateKind::cdd;
    for (Cell c : kAllCells)
        if (all_cells || cell_timepoint(c) == 1) log_ridge(diag, cell_fit_name(c), cells_[cell_index(c)]);
    return diag;
}

CateModel FitCache::fit(CateKind kind) {
    CateModel model;
    model.kind = kind;
    model.dims = obs_.dims();
    switch (kind) {
        case CateKind::rct:
            model.rct_fit = rct();
            model.dims = rct_data().dims();
            log_ridge(model.diagnostics, "rct treated", model.rct_fit->treated);
            log_ridge(model.diagnostics, "rct control", model.rct_fit->control);
            return model;
        case CateKind::cdd:
            model.components = components();
            for (Cell c : kAllCells) log_ridge(model.diagnostics, cell_fit_name(c), model.components.of(c));
            return model;
        case CateKind::obs:
            model.components.mu11 = cell(Cell::treated_post);
            model.components.h2 = cell(Cell::control_post);
            log_ridge(model.diagnostics, cell_fit_name(Cell::treated_post), model.components.mu11);
            log_ridge(model.diagnostics, cell_fit_name(Cell::control_post), model.components.h2);
            return model;
        case CateKind::two_step:
        case CateKind::olt:
            return fit_baseline(kind);
        case CateKind::sdd:
        case CateKind::sdd_ols:
        case CateKind::sdd_no_pre:
            return fit_sdd_family(kind);
    }
    throw InvalidInput("unknown estimator kind");
}

Eigen::VectorXd FitCache::baseline_target() {
    const PanelDataset& trial = rct_data();
    if (cfg_.baseline_signal == RctSignal::shared_fit) return rct().evaluate(trial.covariates);
    trial.validate_rct();
    const double e = trial.treatment.cast<double>().mean();
    if (e <= 0.0 || e >= 1.0) throw InsufficientData("RCT needs rows in both arms");
    Eigen::VectorXd target(trial.rows());
    for (Eigen::Index i = 0; i < trial.rows(); ++i)
        target[i] = trial.outcome[i] * (trial.treatment[i] == 1 ? 1.0 / e : -1.0 / (1.0 - e));
    return target;
}

CateModel FitCache::fit_baseline(CateKind kind) {
    const PanelDataset& trial = rct_data();
    if (trial.dims() != obs_.dims()) throw InvalidInput("RCT and observational covariate dimensions differ");
    CateModel model;
    model.kind = kind;
    model.dims = obs_.dims();
    model.components.mu11 = cell(Cell::treated_post);
    model.components.h2 = cell(Cell::control_post);
    const Eigen::VectorXd target = baseline_target();
    const Eigen::VectorXd g = model.components.mu11->predict(trial.covariates) -
                              model.components.h2->predict(trial.covariates);
    const Eigen::Index q = trial.rows();
    if (kind == CateKind::two_step) {
        Eigen::MatrixXd design(q, trial.dims() + 1);
        design.leftCols(trial.dims()) = trial.covariates;
        design.col(trial.dims()).setOnes();
        const LeastSquaresResult ls = least_squares(design, target - g);
        model.linear_correction.emplace(ls.coefficients.head(trial.dims()),
                                        ls.coefficients[trial.dims()]);
        model.diagnostics = base_diagnostics(kind);
        model.diagnostics.rank_warning = ls.rank_deficient;
    } else {
        Eigen::MatrixXd design(q, 2);
        design.col(0) = g;
        design.col(1).setOnes();
        const LeastSquaresResult ls = least_squares(design, target);
        model.affine_correction.emplace(ls.coefficients[0], ls.coefficients[1]);
        model.diagnostics = base_diagnostics(kind);
        model.diagnostics.rank_warning = ls.rank_deficient;
    }
    return model;
}

CateModel FitCache::fit_sdd_family(CateKind kind) {
    const PanelDataset& trial = rct_data();
    const RctFit& fhat = rct();
    if (trial.dims() != obs_.dims()) throw InvalidInput("RCT and observational covariate dimensions differ");

    CateModel model;
    model.kind = kind;
    model.dims = obs_.dims();
    model.rct_fit = fhat;
    model.components.mu11 = cell(Cell::treated_post);
    if (kind == CateKind::sdd_no_pre) {
        model.components.h2 = cell(Cell::control_post);
    } else {
        model.components = components();
    }

    const Eigen::MatrixXd& Xr = trial.covariates;
    const Eigen::VectorXd k = fhat.evaluate(Xr) - model.components.mu11->predict(Xr);
    Eigen::MatrixXd H;
    if (kind == CateKind::sdd_no_pre) {
        H = -model.components.h2->predict(Xr);
    } else {
        H = model.components.adjustment_matrix(Xr);
    }

    model.diagnostics = base_diagnostics(kind);
    if (kind == CateKind::sdd_ols) {
        OlsBeta ols = solve_beta_ols(H, k);
        model.beta = std::move(ols.beta);
        model.diagnostics.rank_warning = ols.rank_deficient;
        return model;
    }

    BetaProblem problem;
    problem.H = std::move(H);
    problem.k = k;
    problem.lower = cfg_.beta_lower;
    problem.upper = cfg_.beta_upper;
    if (problem.H.rows() < cfg_.folds)
        throw InsufficientData("RCT has fewer rows than CV folds for the beta regression");
    const std::string tag = kind == CateKind::sdd ? "beta/sdd" : "beta/no_pre";
    problem.ridge =
        cv_select_beta_ridge(problem, cfg_.beta_ridge_grid, cfg_.folds, derive_seed(cfg_.seed, tag))
            .ridge;
    model.beta = solve_beta_constrained(problem);
    model.diagnostics.beta_ridge = problem.ridge;
    return model;
}

CateModel fit_rct_cate(const PanelDataset& rct, const EstimatorConfig& cfg) {
    PanelDataset empty;
    empty.covariates.resize(0, rct.dims());
    FitCache cache(empty, &rct, cfg);
    return cache.fit(CateKind::rct);
}

ComponentSet fit_components(const PanelDataset& obs, const EstimatorConfig& cfg) {
    FitCache cache(obs, nullptr, cfg);
    return cache.components();
}

CateModel fit_sdd(const PanelDataset& obs, const PanelDataset& rct, const EstimatorConfig& cfg) {
    return FitCache(obs, &rct, cfg).fit(CateKind::sdd);
}

CateModel fit_cdd(const PanelDataset& obs, const EstimatorConfig& cfg) {
    return FitCache(obs, nullptr, cfg).fit(CateKind::cdd);
}

CateModel fit_two_step(const PanelDataset& obs, const PanelDataset& rct, const EstimatorConfig& cfg) {
    return FitCache(obs, &rct, cfg).fit(CateKind::two_step);
}

CateModel fit_olt(const PanelDataset& obs, const PanelDataset& rct, const EstimatorConfig& cfg) {
    return FitCache(obs, &rct, cfg).fit(CateKind::olt);
}

CateModel fit_obs_only(const PanelDataset& obs, const EstimatorConfig& cfg) {
    return FitCache(obs, nullptr, cfg).fit(CateKind::obs);
}

CateModel fit_sdd_no_pre(const PanelDataset& obs, const PanelDataset& rct, const EstimatorConfig& cfg) {
    return FitCache(obs, &rct, cfg).fit(CateKind::sdd_no_pre);
}

CateModel fit_sdd_ols(const PanelDataset& obs, const PanelDataset& rct, const EstimatorConfig& cfg) {
    return FitCache(obs, &rct, cfg).fit(CateKind::sdd_ols);
}

CateModel fit_estimator(CateKind kind, const PanelDataset& obs, const PanelDataset* rct,
                        const EstimatorConfig& cfg) {
    if (uses_rct(kind) && !rct)
        throw InvalidInput("estimator " + std::string(kind_name(kind)) + " needs RCT data");
    return FitCache(obs, rct, cfg).fit(kind);
}

CateModel make_sdd_model(const ComponentSet& components, const BetaVector& beta) {
    if (beta.size() != 3) throw InvalidInput("SDD needs three beta weights");
    CateModel model;
    model.kind = CateKind::sdd;
    model.dims = require(components.mu11, "T=1,M=1").dims();
    model.components = components;
    model.beta = beta;
    return model;
}

CateModel make_cdd_model(const ComponentSet& components) {
    CateModel model;
    model.kind = CateKind::cdd;
    model.dims = require(components.mu11, "T=1,M=1").dims();
    model.components = components;
    return model;
}

}  // namespace sdd
