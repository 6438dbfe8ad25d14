#include "sdd/synthetic_data.hpp"

#include <cmath>
#include <string>

#include "sdd/error.hpp"

namespace sdd {

std::string_view mean_function_name(MeanFunction f) noexcept {
    switch (f) {
        case MeanFunction::linear: return "Z";
        case MeanFunction::z_phi: return "Z*Phi(Z)";
        case MeanFunction::gaussian_bump: return "exp(-Z^2)";
        case MeanFunction::tanh: return "tanh(Z)";
    }
    return "?";
}

double standard_normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double apply_mean_function(MeanFunction f, double z) noexcept {
    switch (f) {
        case MeanFunction::linear: return z;
        case MeanFunction::z_phi: return z * standard_normal_cdf(z);
        case MeanFunction::gaussian_bump: return std::exp(-z * z);
        case MeanFunction::tanh: return std::tanh(z);
    }
    return 0.0;
}

void DgpConfig::validate() const {
    if (dims < 1) throw InvalidInput("dims must be >= 1");
    if (n_obs < 4 || n_obs % 4 != 0)
        throw InvalidInput("n_obs must be a positive multiple of 4, got " + std::to_string(n_obs));
    if (m_rct_per_arm < 1) throw InvalidInput("m_rct_per_arm must be >= 1");
    if (!(exclusion_rate >= 0.0 && exclusion_rate < 1.0))
        throw InvalidInput("exclusion rate must lie in [0, 1)");
    if (!(noise_variance > 0.0) || !std::isfinite(noise_variance))
        throw InvalidInput("noise variance must be > 0");
    if (!(beta_lo <= beta_hi) || !std::isfinite(beta_lo) || !std::isfinite(beta_hi))
        throw InvalidInput("beta range requires lo <= hi");
}

double covariate_index(const Eigen::Ref<const Eigen::RowVectorXd>& x) noexcept {
    double z = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) z += x[j];
    return z;
}

double GroundTruth::cell_mean_at(Cell c, const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    return apply_mean_function(mean_fns[cell_index(c)], covariate_index(x));
}

Eigen::VectorXd GroundTruth::cell_mean(Cell c, const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = cell_mean_at(c, X.row(i));
    return out;
}

double GroundTruth::cate_at(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    const double mu11 = cell_mean_at(Cell::treated_post, x);
    const double mu01 = cell_mean_at(Cell::treated_pre, x);
    const double mu10 = cell_mean_at(Cell::control_post, x);
    const double mu00 = cell_mean_at(Cell::control_pre, x);
    return (mu11 - mu01 * beta_true[0]) - (mu10 * beta_true[1] - mu00 * beta_true[2]);
}

Eigen::VectorXd GroundTruth::cate(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = cate_at(X.row(i));
    return out;
}

GroundTruth draw_ground_truth(const DgpConfig& cfg, Rng& rng) {
    cfg.validate();
    GroundTruth truth;
    std::uniform_int_distribution<int> pick(0, static_cast<int>(kAllMeanFunctions.size()) - 1);
    for (auto& f : truth.mean_fns) f = kAllMeanFunctions[static_cast<std::size_t>(pick(rng))];
    truth.beta_true.values.resize(3);
    if (cfg.beta_lo == cfg.beta_hi) {
        truth.beta_true.values.setConstant(cfg.beta_lo);
    } else {
        std::uniform_real_distribution<double> beta(cfg.beta_lo, cfg.beta_hi);
        for (Eigen::Index i = 0; i < 3; ++i) truth.beta_true.values[i] = beta(rng);
    }
    return truth;
}

PanelDataset gen_observational(const GroundTruth& truth, const DgpConfig& cfg, Rng& rng) {
    cfg.validate();
    const Eigen::Index per_cell = cfg.n_obs / 4;
    const Eigen::Index n = per_cell * 4;
    PanelDataset data;
    data.covariates.resize(n, cfg.dims);
    data.treatment.resize(n);
    data.timepoint.resize(n);
    data.outcome.resize(n);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, std::sqrt(cfg.noise_variance));
    Eigen::Index row = 0;
    for (Cell c : kAllCells) {
        for (Eigen::Index i = 0; i < per_cell; ++i, ++row) {
            for (int j = 0; j < cfg.dims; ++j) data.covariates(row, j) = unif(rng);
            data.treatment[row] = cell_treatment(c);
            data.timepoint[row] = cell_timepoint(c);
            data.outcome[row] = truth.cell_mean_at(c, data.covariates.row(row)) + noise(rng);
        }
    }
    return data;
}

PanelDataset gen_rct(const GroundTruth& truth, const DgpConfig& cfg, Rng& rng) {
    cfg.validate();
    const Eigen::Index m = cfg.m_rct_per_arm;
    PanelDataset data;
    data.covariates.resize(2 * m, cfg.dims);
    data.treatment.resize(2 * m);
    data.timepoint.setOnes(2 * m);
    data.outcome.resize(2 * m);
    // Strict exclusion on the first covariate: only X1 >= -1 + 2r is ever recruited.
    std::uniform_real_distribution<double> first(-1.0 + 2.0 * cfg.exclusion_rate, 1.0);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, std::sqrt(cfg.noise_variance));
    const Eigen::VectorXd& b = truth.beta_true.values;
    for (Eigen::Index row = 0; row < 2 * m; ++row) {
        const int arm = row < m ? 1 : 0;
        data.covariates(row, 0) = first(rng);
        for (int j = 1; j < cfg.dims; ++j) data.covariates(row, j) = unif(rng);
        const auto x = data.covariates.row(row);
        data.treatment[row] = arm;
        const double mean =
            arm == 1 ? truth.cell_mean_at(Cell::treated_post, x) - truth.cell_mean_at(Cell::treated_pre, x) * b[0]
                     : truth.cell_mean_at(Cell::control_post, x) * b[1] -
                           truth.cell_mean_at(Cell::control_pre, x) * b[2];
        data.outcome[row] = mean + noise(rng);
    }
    return data;
}

SyntheticProblem draw_problem(const DgpConfig& cfg) {
    Rng rng(cfg.seed);
    SyntheticProblem p;
    p.truth = draw_ground_truth(cfg, rng);
    p.obs = gen_observational(p.truth, cfg, rng);
    p.rct = gen_rct(p.truth, cfg, rng);
    return p;
}

}  // namespace sdd
