#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "report.hpp"
#include "sdd/error.hpp"
#include "sdd/seeding.hpp"

#ifndef SDD_VERSION
#define SDD_VERSION "0.0.0"
#endif

namespace sdd::cli {

using nlohmann::json;

namespace {

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string_view combine_name(KernelCombine c) { return c == KernelCombine::sum ? "sum" : "product"; }

KernelCombine parse_combine(const std::string& s) {
    if (s == "product") return KernelCombine::product;
    if (s == "sum") return KernelCombine::sum;
    throw InvalidInput("kernel must be 'product' or 'sum', got '" + s + "'");
}

std::vector<CateKind> parse_kinds(const std::vector<std::string>& names) {
    std::vector<CateKind> out;
    for (const auto& n : names) {
        const CateKind k = parse_kind(n);
        if (std::find(out.begin(), out.end(), k) != out.end())
            throw InvalidInput("estimator '" + n + "' listed twice");
        out.push_back(k);
    }
    return out;
}

json header_json(const FileHeader& h) {
    return json{{"tool", "sdd"}, {"version", h.version}, {"config_hash", h.config_hash}, {"seed", h.seed}};
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidInput("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

template <class T>
T get_as(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidInput(std::string("config key '") + key + "' has the wrong type");
    }
}

}  // namespace

std::string tool_version() { return SDD_VERSION; }

json RunConfig::to_json() const {
    std::vector<std::string> names;
    for (CateKind k : estimators) names.emplace_back(kind_name(k));
    return json{{"seed", seed},
                {"dims", dims},
                {"rates", rates},
                {"reps", reps},
                {"estimators", names},
                {"threads", threads},
                {"out_dir", out_dir},
                {"lambda_grid", lambda_grid},
                {"beta_upper", beta_upper},
                {"n_obs", n_obs},
                {"m_per_arm", m_per_arm},
                {"noise_variance", noise_variance},
                {"kernel", std::string(combine_name(kernel))},
                {"folds", folds},
                {"bootstrap_replicates", bootstrap_replicates}};
}

void RunConfig::apply_json(const json& j) {
    if (!j.is_object()) throw InvalidInput("config must be a JSON object");
    const json known = to_json();
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) throw InvalidInput("unknown config key '" + key + "'");
    if (j.contains("seed")) seed = get_as<std::uint64_t>(j, "seed");
    if (j.contains("dims")) dims = get_as<std::vector<int>>(j, "dims");
    if (j.contains("rates")) rates = get_as<std::vector<double>>(j, "rates");
    if (j.contains("reps")) reps = get_as<int>(j, "reps");
    if (j.contains("estimators")) estimators = parse_kinds(get_as<std::vector<std::string>>(j, "estimators"));
    if (j.contains("threads")) threads = get_as<int>(j, "threads");
    if (j.contains("out_dir")) out_dir = get_as<std::string>(j, "out_dir");
    if (j.contains("lambda_grid")) lambda_grid = get_as<std::vector<double>>(j, "lambda_grid");
    if (j.contains("beta_upper")) beta_upper = get_as<double>(j, "beta_upper");
    if (j.contains("n_obs")) n_obs = get_as<int>(j, "n_obs");
    if (j.contains("m_per_arm")) m_per_arm = get_as<int>(j, "m_per_arm");
    if (j.contains("noise_variance")) noise_variance = get_as<double>(j, "noise_variance");
    if (j.contains("kernel")) kernel = parse_combine(get_as<std::string>(j, "kernel"));
    if (j.contains("folds")) folds = get_as<int>(j, "folds");
    if (j.contains("bootstrap_replicates")) bootstrap_replicates = get_as<int>(j, "bootstrap_replicates");
}

void RunConfig::validate() const {
    if (dims.empty() || rates.empty()) throw InvalidInput("dims and rates must be non-empty");
    if (estimators.empty()) throw InvalidInput("no estimators selected");
    if (reps < 1) throw InvalidInput("reps must be >= 1");
    if (threads < 1) throw InvalidInput("threads must be >= 1");
    if (folds < 2) throw InvalidInput("folds must be >= 2");
    if (bootstrap_replicates < 1) throw InvalidInput("bootstrap replicates must be >= 1");
    if (lambda_grid.empty()) throw InvalidInput("lambda grid is empty");
    for (double l : lambda_grid)
        if (!(l >= 0.0) || !std::isfinite(l)) throw InvalidInput("lambda grid values must be finite and >= 0");
    if (!(beta_upper > 0.0) || !std::isfinite(beta_upper)) throw InvalidInput("beta upper bound must be > 0");
    for (int d : dims) dgp(d, rates.front()).validate();
    for (double r : rates) dgp(dims.front(), r).validate();
}

std::string RunConfig::hash() const {
    json j = to_json();
    j.erase("threads");
    j.erase("out_dir");
    return hex16(fnv1a(j.dump()));
}

FileHeader RunConfig::header() const { return FileHeader{tool_version(), hash(), seed}; }

DgpConfig RunConfig::dgp(int d, double rate) const {
    DgpConfig c;
    c.dims = d;
    c.n_obs = n_obs;
    c.m_rct_per_arm = m_per_arm;
    c.exclusion_rate = rate;
    c.noise_variance = noise_variance;
    c.seed = seed;
    return c;
}

EstimatorConfig RunConfig::estimator() const {
    EstimatorConfig c;
    c.kernel.combine = kernel;
    c.ridge_grid = lambda_grid;
    c.beta_ridge_grid = lambda_grid;
    c.folds = folds;
    c.seed = seed;
    c.beta_upper = beta_upper;
    return c;
}

GridSpec RunConfig::grid() const {
    GridSpec g;
    g.dims = dims;
    g.rates = rates;
    g.replications = reps;
    g.base_seed = seed;
    g.estimators = estimators;
    g.dgp = dgp(dims.front(), rates.front());
    g.estimator = estimator();
    g.threads = threads;
    return g;
}

RunConfig command_defaults(const std::string& command) {
    RunConfig c;
    if (command == "benchmark") c.rates = {0.0, 0.25, 0.5, 0.75, 0.9, 0.95};
    return c;
}

SimulateOutputs cmd_simulate(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.dims.size() != 1 || cfg.rates.size() != 1)
        throw InvalidInput("simulate takes exactly one dims value and one rate");
    const SyntheticProblem p = draw_problem(cfg.dgp(cfg.dims[0], cfg.rates[0]));
    const FileHeader h = cfg.header();
    const std::filesystem::path dir(cfg.out_dir);
    SimulateOutputs o{dir / "obs.csv", dir / "rct.csv", dir / "truth.csv", dir / "manifest.json"};
    write_text(o.obs, panel_csv(p.obs, h));
    write_text(o.rct, panel_csv(p.rct, h));
    write_text(o.truth, truth_csv(p.obs.covariates, p.truth.cate(p.obs.covariates), h));

    std::vector<std::string> fns;
    for (MeanFunction f : p.truth.mean_fns) fns.emplace_back(mean_function_name(f));
    const Eigen::VectorXd& b = p.truth.beta_true.values;
    json manifest{{"_header", header_json(h)},
                  {"command", "simulate"},
                  {"config", cfg.to_json()},
                  {"truth",
                   {{"beta", std::vector<double>(b.data(), b.data() + b.size())},
                    {"cell_means", {{"T=1,M=1", fns[0]}, {"T=1,M=0", fns[1]}, {"T=0,M=1", fns[2]}, {"T=0,M=0", fns[3]}}}}},
                  {"files", {"obs.csv", "rct.csv", "truth.csv"}}};
    write_text(o.manifest, manifest.dump(2) + "\n");
    return o;
}

Eigen::VectorXd cmd_fit(const FitRequest& req, const RunConfig& cfg) {
    cfg.validate();
    const PanelDataset obs = read_panel(req.obs);
    std::optional<PanelDataset> rct;
    if (uses_rct(req.estimator)) {
        if (!req.rct)
            throw InvalidInput("estimator " + std::string(kind_name(req.estimator)) + " needs --rct");
        rct = read_panel(*req.rct);
    }
    Eigen::MatrixXd test = req.test ? read_covariates(read_csv(*req.test)) : obs.covariates;
    if (test.cols() != obs.dims())
        throw InvalidInput("test points have " + std::to_string(test.cols()) + " covariates, data has " +
                           std::to_string(obs.dims()));

    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    FitCache cache(obs, rct ? &*rct : nullptr, cfg.estimator());
    const CateModel model = cache.fit(req.estimator);
    const auto t1 = clock::now();
    const Eigen::VectorXd pred = model.evaluate(test);
    const auto t2 = clock::now();

    const FileHeader h = cfg.header();
    write_text(req.out, predictions_csv(pred, h));

    json meta{{"_header", header_json(h)},
              {"command", "fit"},
              {"estimator", std::string(kind_name(req.estimator))},
              {"config", cfg.to_json()},
              {"rank_warning", model.diagnostics.rank_warning},
              {"rows", pred.size()}};
    json ridges = json::object();
    for (const auto& [name, lambda] : model.diagnostics.ridges) ridges[name] = lambda;
    meta["ridges"] = ridges;
    if (model.beta) {
        const Eigen::VectorXd& b = model.beta->values;
        meta["beta"] = std::vector<double>(b.data(), b.data() + b.size());
    }
    if (model.diagnostics.beta_ridge) meta["beta_ridge"] = *model.diagnostics.beta_ridge;
    meta["timings_seconds"] = {{"fit", std::chrono::duration<double>(t1 - t0).count()},
                               {"predict", std::chrono::duration<double>(t2 - t1).count()}};
    write_text(req.out.string() + ".meta.json", meta.dump(2) + "\n");
    return pred;
}

ResultsTable cmd_benchmark(const RunConfig& cfg) {
    cfg.validate();
    const ResultsTable table = run_grid(cfg.grid());
    const FileHeader h = cfg.header();
    const std::filesystem::path dir(cfg.out_dir);
    write_text(dir / "results.csv", results_csv(table, h));
    write_text(dir / "report.md", markdown_report(table, h));

    const AggregateTable agg = median_over_replications(table);
    json medians = json::array();
    for (std::size_t e = 0; e < agg.estimators.size(); ++e)
        for (std::size_t d = 0; d < agg.dims.size(); ++d)
            for (std::size_t r = 0; r < agg.rates.size(); ++r) {
                const double m = agg.median_at(e, d, r);
                medians.push_back({{"estimator", std::string(kind_name(agg.estimators[e]))},
                                   {"dims", agg.dims[d]},
                                   {"rate", agg.rates[r]},
                                   {"median_mse", std::isnan(m) ? json(nullptr) : json(m)},
                                   {"replications", agg.counts[agg.index(e, d, r)]}});
            }
    json summary{{"_header", header_json(h)},
                 {"command", "benchmark"},
                 {"config", cfg.to_json()},
                 {"failures", table.failure_count()},
                 {"failure_notes", table.failure_notes},
                 {"medians", medians}};
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    return table;
}

void cmd_report(const std::filesystem::path& results, const std::filesystem::path& out_dir) {
    const CsvTable csv = read_csv(results);
    const ResultsTable table = parse_results(csv);
    FileHeader h{tool_version(), "", 0};
    bool found = false;
    for (const auto& c : csv.comments)
        if (auto parsed = parse_header(c)) {
            h.config_hash = parsed->config_hash;
            h.seed = parsed->seed;
            found = true;
            break;
        }
    if (!found) {
        std::ifstream in(results, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        h.config_hash = hex16(fnv1a(ss.str()));
    }
    write_text(out_dir / "report.md", markdown_report(table, h));
    write_text(out_dir / "median_vs_rate.csv", median_vs_rate_csv(table, h));
    if (table.dims.size() > 1) write_text(out_dir / "median_vs_dims.csv", median_vs_dims_csv(table, h));
    write_text(out_dir / "skewness_vs_rate.csv", skewness_vs_rate_csv(table, h));
}

BootstrapResult cmd_bootstrap(const BootstrapRequest& req, const RunConfig& cfg) {
    cfg.validate();
    if (!req.truth)
        throw UnsupportedEvaluation(
            "bootstrap scoring needs --truth (a CSV of x1..xd,cate); user data has no ground truth");
    const PanelDataset obs = read_panel(req.obs);
    std::optional<PanelDataset> rct;
    if (req.rct) rct = read_panel(*req.rct);
    const TruthTable t = read_truth(*req.truth);
    BootstrapOptions opt;
    opt.replicates = cfg.bootstrap_replicates;
    opt.seed = cfg.seed;
    opt.estimator = cfg.estimator();
    const BootstrapResult res =
        bootstrap_compare(obs, rct ? &*rct : nullptr, cfg.estimators, TruthReference{t.points, t.cate}, opt);

    const FileHeader h = cfg.header();
    std::string csv = "# " + h.text() + "\nestimator,replicate,mse,failed\n";
    json medians = json::object();
    for (std::size_t e = 0; e < res.estimators.size(); ++e) {
        std::vector<double> ok;
        for (std::size_t b = 0; b < res.mse[e].size(); ++b) {
            const double v = res.mse[e][b];
            const bool failed = std::isnan(v);
            csv += std::string(kind_name(res.estimators[e])) + "," + std::to_string(b) + "," +
                   (failed ? std::string() : format_double(v)) + "," + (failed ? "1" : "0") + "\n";
            if (!failed) ok.push_back(v);
        }
        medians[std::string(kind_name(res.estimators[e]))] = ok.empty() ? json(nullptr) : json(median(ok));
    }
    const std::filesystem::path dir(cfg.out_dir);
    write_text(dir / "bootstrap.csv", csv);
    json summary{{"_header", header_json(h)}, {"command", "bootstrap"}, {"config", cfg.to_json()},
                 {"median_mse", medians}};
    write_text(dir / "bootstrap_summary.json", summary.dump(2) + "\n");
    return res;
}

namespace {

/// Flags shared by several subcommands. Each registered flag remembers how to copy
/// its parsed value into a RunConfig, applied only when the flag was given.
struct FlagSet {
    std::string config_path;
    std::uint64_t seed = 0;
    std::vector<int> dims;
    std::vector<double> rates;
    int reps = 0, threads = 0, n_obs = 0, m_per_arm = 0, folds = 0, boot = 0;
    std::vector<std::string> estimators;
    std::string out_dir, kernel;
    std::vector<double> lambda_grid;
    double beta_upper = 0.0, noise = 0.0;
    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> setters;

    void add(CLI::App& app, const std::string& name) {
        CLI::Option* o = nullptr;
        std::function<void(RunConfig&)> set;
        if (name == "seed") {
            o = app.add_option("--seed", seed, "Base random seed");
            set = [this](RunConfig& c) { c.seed = seed; };
        } else if (name == "dims") {
            o = app.add_option("--dims", dims, "Covariate dimensions (comma list)")->delimiter(',');
            set = [this](RunConfig& c) { c.dims = dims; };
        } else if (name == "rate") {
            o = app.add_option("--rate", rates, "Exclusion rates in [0,1) (comma list)")->delimiter(',');
            set = [this](RunConfig& c) { c.rates = rates; };
        } else if (name == "reps") {
            o = app.add_option("--reps", reps, "Replications per grid cell");
            set = [this](RunConfig& c) { c.reps = reps; };
        } else if (name == "estimators") {
            o = app.add_option("--estimators", estimators, "Estimators (comma list)")->delimiter(',');
            set = [this](RunConfig& c) { c.estimators = parse_kinds(estimators); };
        } else if (name == "threads") {
            o = app.add_option("--threads", threads, "Worker threads");
            set = [this](RunConfig& c) { c.threads = threads; };
        } else if (name == "out-dir") {
            o = app.add_option("--out-dir", out_dir, "Output directory");
            set = [this](RunConfig& c) { c.out_dir = out_dir; };
        } else if (name == "lambda-grid") {
            o = app.add_option("--lambda-grid", lambda_grid, "Ridge grid for every CV search (comma list)")
                    ->delimiter(',');
            set = [this](RunConfig& c) { c.lambda_grid = lambda_grid; };
        } else if (name == "beta-upper") {
            o = app.add_option("--beta-upper", beta_upper, "Upper bound of each beta weight");
            set = [this](RunConfig& c) { c.beta_upper = beta_upper; };
        } else if (name == "n-obs") {
            o = app.add_option("--n-obs", n_obs, "Observational rows (multiple of 4)");
            set = [this](RunConfig& c) { c.n_obs = n_obs; };
        } else if (name == "m") {
            o = app.add_option("--m", m_per_arm, "RCT rows per arm");
            set = [this](RunConfig& c) { c.m_per_arm = m_per_arm; };
        } else if (name == "noise") {
            o = app.add_option("--noise-variance", noise, "Outcome noise variance");
            set = [this](RunConfig& c) { c.noise_variance = noise; };
        } else if (name == "kernel") {
            o = app.add_option("--kernel", kernel, "Kernel combination: product or sum");
            set = [this](RunConfig& c) { c.kernel = parse_combine(kernel); };
        } else if (name == "folds") {
            o = app.add_option("--folds", folds, "Cross-validation folds");
            set = [this](RunConfig& c) { c.folds = folds; };
        } else if (name == "B") {
            o = app.add_option("-B,--replicates", boot, "Bootstrap replicates");
            set = [this](RunConfig& c) { c.bootstrap_replicates = boot; };
        } else if (name == "config") {
            app.add_option("--config", config_path, "JSON config file (flags take precedence)");
            return;
        }
        setters.emplace_back(o, std::move(set));
    }

    void add_all(CLI::App& app, std::initializer_list<const char*> names) {
        for (const char* n : names) add(app, n);
    }

    [[nodiscard]] RunConfig merged(const std::string& command) const {
        RunConfig c = command_defaults(command);
        if (!config_path.empty()) c.apply_json(read_json_file(config_path));
        for (const auto& [opt, set] : setters)
            if (opt->count() > 0) set(c);
        return c;
    }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Synthesized difference in differences: CATE estimation from RCT and observational data",
                 "sdd"};
    app.set_version_flag("--version", tool_version());
    app.require_subcommand(1);

    std::string command;
    FlagSet flags;
    FitRequest fit_req;
    std::string fit_rct, fit_test, fit_estimator = "sdd";
    BootstrapRequest boot_req;
    std::string boot_rct, boot_truth;
    std::string report_results, report_out = ".";

    CLI::App* sim = app.add_subcommand("simulate", "Draw a synthetic problem and write obs/rct/truth CSVs");
    flags.add_all(*sim, {"config", "seed", "dims", "rate", "n-obs", "m", "noise", "out-dir"});

    CLI::App* fit = app.add_subcommand("fit", "Fit one estimator and predict the CATE at test points");
    fit->add_option("--obs", fit_req.obs, "Observational CSV")->required();
    fit->add_option("--rct", fit_rct, "RCT CSV");
    fit->add_option("--test", fit_test, "Test points CSV (x1..xd; other columns ignored)");
    fit->add_option("--estimator", fit_estimator, "Estimator name");
    fit->add_option("--out", fit_req.out, "Predictions CSV")->required();
    flags.add_all(*fit, {"config", "seed", "lambda-grid", "beta-upper", "kernel", "folds"});

    CLI::App* bench = app.add_subcommand("benchmark", "Run the simulation grid and write results and report");
    flags.add_all(*bench, {"config", "seed", "dims", "rate", "reps", "estimators", "threads", "out-dir",
                           "lambda-grid", "beta-upper", "n-obs", "m", "noise", "kernel", "folds"});

    CLI::App* rep = app.add_subcommand("report", "Rebuild the report and plot data from results.csv");
    rep->add_option("results", report_results, "results.csv")->required();
    rep->add_option("--out-dir", report_out, "Output directory");

    CLI::App* boot = app.add_subcommand("bootstrap", "Stratified bootstrap MSE distributions on CSV data");
    boot->add_option("--obs", boot_req.obs, "Observational CSV")->required();
    boot->add_option("--rct", boot_rct, "RCT CSV");
    boot->add_option("--truth", boot_truth, "Ground-truth CSV (x1..xd,cate)");
    flags.add_all(*boot, {"config", "seed", "estimators", "B", "out-dir", "lambda-grid", "beta-upper", "kernel",
                          "folds"});

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInvalidInput;
    }

    try {
        if (sim->parsed()) {
            const auto o = cmd_simulate(flags.merged("simulate"));
            out << "wrote " << o.obs.string() << ", " << o.rct.string() << ", " << o.truth.string() << ", "
                << o.manifest.string() << "\n";
        } else if (fit->parsed()) {
            fit_req.estimator = parse_kind(fit_estimator);
            if (!fit_rct.empty()) fit_req.rct = fit_rct;
            if (!fit_test.empty()) fit_req.test = fit_test;
            const auto pred = cmd_fit(fit_req, flags.merged("fit"));
            out << "wrote " << pred.size() << " predictions to " << fit_req.out.string() << "\n";
        } else if (bench->parsed()) {
            const RunConfig cfg = flags.merged("benchmark");
            const ResultsTable table = cmd_benchmark(cfg);
            out << "wrote " << (std::filesystem::path(cfg.out_dir) / "results.csv").string() << " and report.md\n";
            if (table.failure_count() > 0) {
                err << table.failure_count() << " of " << table.size() << " fits failed\n";
                for (std::size_t i = 0; i < table.failure_notes.size() && i < 10; ++i)
                    err << "  " << table.failure_notes[i] << "\n";
                return kExitPartialFailure;
            }
        } else if (rep->parsed()) {
            cmd_report(report_results, report_out);
            out << "wrote report to " << report_out << "\n";
        } else if (boot->parsed()) {
            if (!boot_rct.empty()) boot_req.rct = boot_rct;
            if (!boot_truth.empty()) boot_req.truth = boot_truth;
            const RunConfig cfg = flags.merged("bootstrap");
            const auto res = cmd_bootstrap(boot_req, cfg);
            out << "wrote " << (std::filesystem::path(cfg.out_dir) / "bootstrap.csv").string() << "\n";
            std::size_t failures = 0;
            for (std::size_t f : res.failures) failures += f;
            if (failures > 0) {
                err << failures << " bootstrap fits failed\n";
                return kExitPartialFailure;
            }
        }
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalidInput;
    }
    return kExitOk;
}

}  // namespace sdd::cli
