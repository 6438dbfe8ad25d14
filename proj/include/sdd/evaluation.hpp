#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdd/estimators.hpp"
#include "sdd/panel.hpp"

namespace sdd {

[[nodiscard]] double mse(std::span<const double> pred, std::span<const double> truth);
[[nodiscard]] double mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

/// Median; the mean of the two middle values for even counts. Throws on empty input.
[[nodiscard]] double median(std::vector<double> values);

/// Per-replication MSE over (estimator, dims, exclusion rate, replication).
struct ResultsTable {
    std::vector<CateKind> estimators;
    std::vector<int> dims;
    std::vector<double> rates;
    int replications = 0;
    std::uint64_t base_seed = 0;
    std::vector<double> mse;   ///< flat, see index()
    std::vector<char> failed;  ///< same layout as mse
    std::vector<std::string> failure_notes;

    /// Allocates mse/failed for the current axes, all failed = false, mse = 0.
    void allocate();
    [[nodiscard]] std::size_t index(std::size_t e, std::size_t d, std::size_t r,
                                    std::size_t rep) const;
    [[nodiscard]] std::size_t size() const noexcept { return mse.size(); }
    [[nodiscard]] std::size_t failure_count() const;
    /// MSEs of the non-failed replications of one cell, in replication order.
    [[nodiscard]] std::vector<double> sample(std::size_t e, std::size_t d, std::size_t r) const;
    /// Non-failed MSEs of one (estimator, dims) pair over every rate.
    [[nodiscard]] std::vector<double> pooled_sample(std::size_t e, std::size_t d) const;
    [[nodiscard]] std::optional<std::size_t> estimator_index(CateKind k) const;
    void validate() const;
};

/// Median over replications of each (estimator, dims, rate) cell.
struct AggregateTable {
    std::vector<CateKind> estimators;
    std::vector<int> dims;
    std::vector<double> rates;
    std::vector<double> medians;  ///< NaN where every replication failed
    std::vector<int> counts;      ///< non-failed replications

    [[nodiscard]] std::size_t index(std::size_t e, std::size_t d, std::size_t r) const {
        return (e * dims.size() + d) * rates.size() + r;
    }
    [[nodiscard]] double median_at(std::size_t e, std::size_t d, std::size_t r) const {
        return medians[index(e, d, r)];
    }
};

[[nodiscard]] AggregateTable median_over_replications(const ResultsTable& table);

struct MoodTest {
    double statistic = 0.0;  ///< continuity-corrected chi-square, 1 df
    double p_value = 1.0;
    double grand_median = 0.0;
    std::size_t a_above = 0, a_not_above = 0;
    std::size_t b_above = 0, b_not_above = 0;
};

/// Yates-corrected chi-square for the 2x2 table [[a, b], [c, d]].
[[nodiscard]] double yates_chi_square(double a, double b, double c, double d);

/// Upper tail of chi-square with one degree of freedom.
[[nodiscard]] double chi_square_1df_sf(double statistic);

/// Mood's median test. Values equal to the pooled median count as "not above".
[[nodiscard]] MoodTest moods_median_test_detail(std::span<const double> a, std::span<const double> b);
[[nodiscard]] double moods_median_test(std::span<const double> a, std::span<const double> b);

/// Adjusted Fisher-Pearson skewness G1. Throws UndefinedStatistic for n < 3 or zero spread.
[[nodiscard]] double sample_skewness(std::span<const double> sample);

/// Winner of one (dims, rate) column among the non-ablation estimators.
struct ColumnWinner {
    std::size_t estimator = 0;  ///< index into the table's estimator axis
    bool significant = false;   ///< p < alpha against every other main estimator
};

/// Lowest-median non-ablation entry of `samples` (one per kind; empty samples are
/// skipped) and whether Mood's test separates it from every other such entry.
[[nodiscard]] std::optional<ColumnWinner> best_estimator(const std::vector<CateKind>& kinds,
                                                         const std::vector<std::vector<double>>& samples,
                                                         double alpha = 0.05 / 5.0);

/// Lowest-median main estimator of the column and whether Mood's test separates it
/// from every competitor at `alpha`. Empty when no main estimator has data.
[[nodiscard]] std::optional<ColumnWinner> column_winner(const ResultsTable& table, std::size_t d,
                                                        std::size_t r, double alpha = 0.05 / 5.0);

/// Ground-truth CATE at fixed evaluation points.
struct TruthReference {
    Eigen::MatrixXd points;
    Eigen::VectorXd cate;
};

struct BootstrapOptions {
    int replicates = 100;
    std::uint64_t seed = 0;
    /// Use the original rows every replicate instead of resampling.
    bool identity_resample = false;
    EstimatorConfig estimator;
};

struct BootstrapResult {
    std::vector<CateKind> estimators;
    std::vector<std::vector<double>> mse;  ///< [estimator][replicate], NaN on failure
    std::vector<std::size_t> failures;
};

/// Stratified bootstrap: observational rows are resampled within each (T, M) cell and
/// trial rows within each arm, so every replicate keeps the original cell sizes.
/// Scoring needs `truth`; without it UnsupportedEvaluation is thrown.
[[nodiscard]] BootstrapResult bootstrap_compare(const PanelDataset& obs, const PanelDataset* rct,
                                                const std::vector<CateKind>& estimators,
                                                const std::optional<TruthReference>& truth,
                                                const BootstrapOptions& options);

}  // namespace sdd
