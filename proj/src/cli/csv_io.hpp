#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sdd/evaluation.hpp"
#include "sdd/panel.hpp"

namespace sdd::cli {

/// Provenance line written at the top of every output file.
struct FileHeader {
    std::string version;
    std::string config_hash;  ///< 16 hex digits
    std::uint64_t seed = 0;

    [[nodiscard]] std::string text() const;  ///< "sdd <version> config=<hash> seed=<seed>"
};

/// Shortest round-trip decimal form.
[[nodiscard]] std::string format_double(double v);

/// Inverse of FileHeader::text(); empty when `line` is not a header.
[[nodiscard]] std::optional<FileHeader> parse_header(std::string_view line);

/// Comma-separated rows with a named header. Lines starting with '#' and blank
/// lines are skipped.
struct CsvTable {
    std::string source;
    std::vector<std::string> comments;  ///< '#' lines with the marker and one space stripped
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  ///< file line of each row

    [[nodiscard]] std::ptrdiff_t find(std::string_view column) const;
    /// Column index or ParseError naming the missing column.
    [[nodiscard]] std::size_t require(std::string_view column) const;
    [[nodiscard]] double number(std::size_t row, std::size_t col) const;
    [[nodiscard]] int flag(std::size_t row, std::size_t col) const;  ///< 0 or 1
};

[[nodiscard]] CsvTable read_csv(const std::filesystem::path& path);
[[nodiscard]] CsvTable parse_csv(std::string_view text, const std::string& source);

/// Columns x1..xd present in the table, in index order. Throws if there is none
/// or if the indices are not contiguous from 1.
[[nodiscard]] std::vector<std::size_t> covariate_columns(const CsvTable& t);

[[nodiscard]] Eigen::MatrixXd read_covariates(const CsvTable& t);
[[nodiscard]] PanelDataset read_panel(const std::filesystem::path& path);

/// x1..xd plus cate.
struct TruthTable {
    Eigen::MatrixXd points;
    Eigen::VectorXd cate;
};
[[nodiscard]] TruthTable read_truth(const std::filesystem::path& path);

[[nodiscard]] std::string panel_csv(const PanelDataset& data, const FileHeader& header);
[[nodiscard]] std::string truth_csv(const Eigen::MatrixXd& X, const Eigen::VectorXd& cate,
                                    const FileHeader& header);
[[nodiscard]] std::string predictions_csv(const Eigen::VectorXd& cate, const FileHeader& header);

/// Long format: estimator,dims,rate,rep,mse,failed.
[[nodiscard]] std::string results_csv(const ResultsTable& table, const FileHeader& header);
[[nodiscard]] ResultsTable parse_results(const CsvTable& t);
[[nodiscard]] ResultsTable read_results(const std::filesystem::path& path);

/// Writes through a temporary file and renames it into place. Throws IoError.
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace sdd::cli
