#pragma once

#include <cstdint>
#include <vector>

#include "sdd/estimators.hpp"
#include "sdd/evaluation.hpp"
#include "sdd/synthetic_data.hpp"

namespace sdd {

struct GridSpec {
    std::vector<int> dims = {3};
    std::vector<double> rates = {0.0, 0.25, 0.5, 0.75, 0.9, 0.95};
    int replications = 100;
    std::uint64_t base_seed = 0;
    std::vector<CateKind> estimators{kAllCateKinds.begin(), kAllCateKinds.end()};
    DgpConfig dgp;              ///< dims, exclusion_rate and seed are overwritten per cell
    EstimatorConfig estimator;  ///< seed is overwritten per replication
    int threads = 1;

    void validate() const;
};

/// Seed of replication `rep` at grid cell (dims, rate).
[[nodiscard]] std::uint64_t replication_seed(std::uint64_t base, int dims, double rate, int rep);

/// Runs every (dims, rate, replication) problem and scores each estimator by MSE
/// against the true CATE on the observational covariates. Estimator failures are
/// recorded in the table rather than thrown. Results do not depend on `threads`.
[[nodiscard]] ResultsTable run_grid(const GridSpec& spec);

}  // namespace sdd
