#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "csv_io.hpp"
#include "sdd/benchmark.hpp"
#include "sdd/estimators.hpp"
#include "sdd/synthetic_data.hpp"

namespace sdd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalidInput = 2;
inline constexpr int kExitPartialFailure = 3;
inline constexpr int kExitIo = 4;

[[nodiscard]] std::string tool_version();

/// Every setting a command may read. Precedence: flags > JSON config file > defaults.
struct RunConfig {
    std::uint64_t seed = 0;
    std::vector<int> dims = {3};
    std::vector<double> rates = {0.0};
    int reps = 100;
    std::vector<CateKind> estimators{kAllCateKinds.begin(), kAllCateKinds.end()};
    int threads = 1;
    std::string out_dir = ".";
    std::vector<double> lambda_grid = default_ridge_grid();
    double beta_upper = 3.0;
    int n_obs = 1000;
    int m_per_arm = 50;
    double noise_variance = 0.1;
    KernelCombine kernel = KernelCombine::product;
    int folds = 5;
    int bootstrap_replicates = 100;

    [[nodiscard]] nlohmann::json to_json() const;
    /// Overwrites the fields present in `j`. Unknown keys are rejected.
    void apply_json(const nlohmann::json& j);
    void validate() const;

    /// FNV-1a of the canonical JSON, ignoring settings that cannot change results
    /// (threads, out_dir).
    [[nodiscard]] std::string hash() const;
    [[nodiscard]] FileHeader header() const;

    [[nodiscard]] DgpConfig dgp(int dims, double rate) const;
    [[nodiscard]] EstimatorConfig estimator() const;
    [[nodiscard]] GridSpec grid() const;
};

/// Defaults of one command before any file or flag is applied.
[[nodiscard]] RunConfig command_defaults(const std::string& command);

struct SimulateOutputs {
    std::filesystem::path obs, rct, truth, manifest;
};
SimulateOutputs cmd_simulate(const RunConfig& cfg);

struct FitRequest {
    std::filesystem::path obs;
    std::optional<std::filesystem::path> rct;
    std::optional<std::filesystem::path> test;  ///< default: the observational covariates
    std::filesystem::path out;
    CateKind estimator = CateKind::sdd;
};
/// Writes predictions and `<out>.meta.json`. Returns the predictions.
Eigen::VectorXd cmd_fit(const FitRequest& req, const RunConfig& cfg);

/// Writes results.csv, report.md and summary.json into cfg.out_dir.
ResultsTable cmd_benchmark(const RunConfig& cfg);

/// Writes report.md and the plot-data CSVs next to each other in `out_dir`.
void cmd_report(const std::filesystem::path& results, const std::filesystem::path& out_dir);

struct BootstrapRequest {
    std::filesystem::path obs;
    std::optional<std::filesystem::path> rct;
    std::optional<std::filesystem::path> truth;
};
BootstrapResult cmd_bootstrap(const BootstrapRequest& req, const RunConfig& cfg);

/// Full command-line entry point. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sdd::cli
