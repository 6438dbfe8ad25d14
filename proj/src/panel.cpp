#include "sdd/panel.hpp"

#include <string>

#include "sdd/error.hpp"

namespace sdd {

std::string_view cell_label(Cell c) noexcept {
    switch (c) {
        case Cell::treated_post: return "T=1,M=1";
        case Cell::treated_pre: return "T=1,M=0";
        case Cell::control_post: return "T=0,M=1";
        case Cell::control_pre: return "T=0,M=0";
    }
    return "?";
}

void PanelDataset::validate() const {
    const Eigen::Index n = covariates.rows();
    if (n < 1) throw InvalidInput("dataset has no rows");
    if (covariates.cols() < 1) throw InvalidInput("dataset has no covariate columns");
    if (treatment.size() != n || timepoint.size() != n || outcome.size() != n)
        throw InvalidInput("dataset columns have different lengths");
    if (!covariates.allFinite()) throw InvalidInput("dataset covariates contain non-finite values");
    if (!outcome.allFinite()) throw InvalidInput("dataset outcomes contain non-finite values");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (treatment[i] != 0 && treatment[i] != 1)
            throw InvalidInput("treatment must be 0 or 1 (row " + std::to_string(i) + ")");
        if (timepoint[i] != 0 && timepoint[i] != 1)
            throw InvalidInput("timepoint must be 0 or 1 (row " + std::to_string(i) + ")");
    }
}

void PanelDataset::validate_rct() const {
    validate();
    for (Eigen::Index i = 0; i < rows(); ++i)
        if (timepoint[i] != 1)
            throw InvalidInput("RCT rows must all have timepoint 1 (row " + std::to_string(i) + ")");
}

std::vector<Eigen::Index> PanelDataset::rows_where(int t, int m) const {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < rows(); ++i)
        if (treatment[i] == t && timepoint[i] == m) idx.push_back(i);
    return idx;
}

PanelDataset PanelDataset::select(const std::vector<Eigen::Index>& idx) const {
    PanelDataset out;
    out.covariates = covariates(idx, Eigen::all);
    out.treatment = treatment(idx);
    out.timepoint = timepoint(idx);
    out.outcome = outcome(idx);
    return out;
}

}  // namespace sdd
