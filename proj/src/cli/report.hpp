#pragma once

#include <string>

#include "csv_io.hpp"
#include "sdd/evaluation.hpp"

namespace sdd::cli {

/// Median-MSE tables in the layout of a results table: main estimators, a dashed
/// separator, then ablations. With several rates there is one table per dims value
/// (columns = rates); with several dims there is also a table with dims columns,
/// pooling every rate. A cell is bold when its estimator wins the column under the
/// Bonferroni-corrected Mood's median test.
[[nodiscard]] std::string markdown_report(const ResultsTable& table, const FileHeader& header);

/// dims,rate,<estimator...> medians.
[[nodiscard]] std::string median_vs_rate_csv(const ResultsTable& table, const FileHeader& header);
/// dims,<estimator...> medians pooled over rates.
[[nodiscard]] std::string median_vs_dims_csv(const ResultsTable& table, const FileHeader& header);
/// dims,rate,SDD,RCT,-CON sample skewness of the MSEs; "nan" where undefined or absent.
[[nodiscard]] std::string skewness_vs_rate_csv(const ResultsTable& table, const FileHeader& header);

}  // namespace sdd::cli
