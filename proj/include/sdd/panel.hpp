#pragma once

#include <array>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace sdd {

/// One (treatment, timepoint) cell of an observational panel.
enum class Cell { treated_post, treated_pre, control_post, control_pre };

inline constexpr std::array<Cell, 4> kAllCells = {Cell::treated_post, Cell::treated_pre,
                                                  Cell::control_post, Cell::control_pre};

constexpr int cell_treatment(Cell c) noexcept {
    return (c == Cell::treated_post || c == Cell::treated_pre) ? 1 : 0;
}
constexpr int cell_timepoint(Cell c) noexcept {
    return (c == Cell::treated_post || c == Cell::control_post) ? 1 : 0;
}
constexpr std::size_t cell_index(Cell c) noexcept { return static_cast<std::size_t>(c); }

/// "T=1,M=1" style label.
std::string_view cell_label(Cell c) noexcept;

/// Rows of (covariates x, treatment t, timepoint m, outcome y).
///
/// An RCT sample is an ordinary panel whose timepoint column is all ones; trial
/// membership is implied by which dataset a row belongs to.
struct PanelDataset {
    Eigen::MatrixXd covariates;
    Eigen::VectorXi treatment;
    Eigen::VectorXi timepoint;
    Eigen::VectorXd outcome;

    [[nodiscard]] Eigen::Index rows() const noexcept { return covariates.rows(); }
    [[nodiscard]] Eigen::Index dims() const noexcept { return covariates.cols(); }

    /// Throws InvalidInput on mismatched lengths, empty data, labels outside {0,1},
    /// or non-finite values.
    void validate() const;
    /// `validate()` plus timepoint == 1 on every row.
    void validate_rct() const;

    [[nodiscard]] std::vector<Eigen::Index> rows_where(int t, int m) const;
    [[nodiscard]] std::vector<Eigen::Index> rows_where(Cell c) const {
        return rows_where(cell_treatment(c), cell_timepoint(c));
    }
    [[nodiscard]] PanelDataset select(const std::vector<Eigen::Index>& idx) const;
};

}  // namespace sdd
