#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "csv_io.hpp"
#include "report.hpp"
#include "sdd/error.hpp"

using namespace sdd;
using namespace sdd::cli;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        path_ = fs::temp_directory_path() / (std::string("sdd_cli_") + info->test_suite_name() + "_" + info->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    [[nodiscard]] const fs::path& path() const { return path_; }
    [[nodiscard]] std::string str(const char* name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Invocation {
    int code;
    std::string out, err;
};

Invocation invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "sdd");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(-2.0), "-2");
    EXPECT_EQ(format_double(std::nan("")), "nan");
    for (double v : {1.0 / 3.0, 1e-300, 123456.789, -0.0625})
        EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(Header, RoundTrip) {
    const FileHeader h{"1.2.3", "00ff00ff00ff00ff", 42};
    EXPECT_EQ(h.text(), "sdd 1.2.3 config=00ff00ff00ff00ff seed=42");
    const auto back = parse_header(h.text());
    ASSERT_TRUE(back);
    EXPECT_EQ(back->version, "1.2.3");
    EXPECT_EQ(back->config_hash, h.config_hash);
    EXPECT_EQ(back->seed, 42u);
    EXPECT_FALSE(parse_header("estimator,dims"));
}

TEST(ParseCsv, CommentsBlankLinesAndNumbers) {
    const CsvTable t = parse_csv("# hello\nx1,x2,y\n\n1,2,3\n# mid\n4.5,-1e-3,nan\n", "mem");
    EXPECT_EQ(t.comments, (std::vector<std::string>{"hello", "mid"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.line_numbers[1], 6u);
    EXPECT_DOUBLE_EQ(t.number(1, t.require("x2")), -1e-3);
    EXPECT_EQ(t.find("z"), -1);
}

TEST(ParseCsv, ErrorsCarryLocation) {
    try {
        const CsvTable t = parse_csv("x1,y\n1,2\n3\n", "f.csv");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("f.csv:3"), std::string::npos);
    }
    const CsvTable t = parse_csv("x1,t\nabc,2\n", "g.csv");
    try {
        (void)t.number(0, 0);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_EQ(e.column(), 1u);
    }
    EXPECT_THROW((void)t.flag(0, 1), ParseError);
    EXPECT_THROW((void)t.require("y"), ParseError);
}

TEST(ParseCsv, CovariateColumnsMustBeContiguous) {
    EXPECT_EQ(covariate_columns(parse_csv("y,x2,x1\n0,1,2\n", "a")), (std::vector<std::size_t>{2, 1}));
    EXPECT_THROW((void)covariate_columns(parse_csv("x1,x3\n0,1\n", "b")), Error);
    EXPECT_THROW((void)covariate_columns(parse_csv("y\n0\n", "c")), Error);
}

TEST(ResultsCsv, RoundTripWithFailures) {
    ResultsTable t;
    t.estimators = {CateKind::sdd, CateKind::rct};
    t.dims = {1, 3};
    t.rates = {0.0, 0.95};
    t.replications = 2;
    t.allocate();
    for (std::size_t i = 0; i < t.size(); ++i) t.mse[i] = 0.01 * static_cast<double>(i) + 1.0 / 7.0;
    t.failed[5] = 1;
    t.mse[5] = std::nan("");
    const FileHeader h{"0.1.0", "0123456789abcdef", 7};
    const std::string csv = results_csv(t, h);
    EXPECT_EQ(csv.rfind("# sdd 0.1.0", 0), 0u);
    const ResultsTable back = parse_results(parse_csv(csv, "mem"));
    EXPECT_EQ(back.estimators, t.estimators);
    EXPECT_EQ(back.dims, t.dims);
    EXPECT_EQ(back.rates, t.rates);
    EXPECT_EQ(back.failed, t.failed);
    for (std::size_t i = 0; i < t.size(); ++i)
        if (!t.failed[i]) EXPECT_EQ(back.mse[i], t.mse[i]);
}

TEST(ResultsCsv, RejectsDuplicatesAndEmpty) {
    EXPECT_THROW((void)parse_results(parse_csv("estimator,dims,rate,rep,mse,failed\n", "e")), InvalidInput);
    EXPECT_THROW((void)parse_results(parse_csv(
                     "estimator,dims,rate,rep,mse,failed\nsdd,1,0,0,0.1,0\nsdd,1,0,0,0.2,0\n", "d")),
                 Error);
}

TEST(Report, MarkdownStructure) {
    ResultsTable t;
    t.estimators = {CateKind::sdd, CateKind::cdd, CateKind::sdd_ols};
    t.dims = {3};
    t.rates = {0.0, 0.5};
    t.replications = 30;
    t.allocate();
    for (std::size_t i = 0; i < t.size(); ++i) t.mse[i] = 1.0 + static_cast<double>(i % 30) / 30.0;
    for (std::size_t r = 0; r < 30; ++r) t.mse[t.index(0, 0, 0, r)] = 0.01 * static_cast<double>(r);
    const std::string md = markdown_report(t, FileHeader{"0.1.0", "0000000000000000", 0});
    EXPECT_NE(md.find("# Benchmark report"), std::string::npos);
    EXPECT_NE(md.find("**"), std::string::npos);
    EXPECT_LT(md.find("CDD"), md.find("-CON"));
    EXPECT_NE(md.find("- - -"), std::string::npos);

    const std::string skew = skewness_vs_rate_csv(t, FileHeader{"0.1.0", "0000000000000000", 0});
    EXPECT_NE(skew.find("dims,rate,SDD,RCT,-CON"), std::string::npos);
    EXPECT_NE(skew.find("nan"), std::string::npos);
}

TEST(RunConfig, JsonRoundTripAndHash) {
    RunConfig c;
    c.seed = 11;
    c.dims = {1, 6};
    c.kernel = KernelCombine::sum;
    RunConfig d;
    d.apply_json(c.to_json());
    EXPECT_EQ(d.to_json(), c.to_json());
    EXPECT_EQ(d.hash(), c.hash());
    d.threads = 8;
    d.out_dir = "/elsewhere";
    EXPECT_EQ(d.hash(), c.hash());
    d.seed = 12;
    EXPECT_NE(d.hash(), c.hash());
    EXPECT_EQ(c.hash().size(), 16u);
    EXPECT_THROW(d.apply_json(nlohmann::json{{"sed", 1}}), InvalidInput);
}

TEST(RunConfig, Validation) {
    RunConfig c;
    c.rates = {1.0};
    EXPECT_THROW(c.validate(), InvalidInput);
    c = RunConfig{};
    c.threads = 0;
    EXPECT_THROW(c.validate(), InvalidInput);
    c = RunConfig{};
    c.lambda_grid = {};
    EXPECT_THROW(c.validate(), InvalidInput);
}

TEST(Run, SimulateFitAndReport) {
    TempDir dir;
    const std::string out = dir.path().string();
    auto r = invoke({"simulate", "--seed", "3", "--dims", "2", "--rate", "0.5", "--n-obs", "200", "--m", "20",
                     "--out-dir", out});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const CsvTable obs = read_csv(dir.path() / "obs.csv");
    EXPECT_EQ(obs.rows.size(), 200u);
    ASSERT_FALSE(obs.comments.empty());
    EXPECT_TRUE(parse_header(obs.comments[0]));
    const CsvTable rct = read_csv(dir.path() / "rct.csv");
    EXPECT_EQ(rct.rows.size(), 40u);
    for (std::size_t i = 0; i < rct.rows.size(); ++i) EXPECT_GE(rct.number(i, rct.require("x1")), 0.0);
    const nlohmann::json manifest = nlohmann::json::parse(slurp(dir.path() / "manifest.json"));
    EXPECT_EQ(manifest["config"]["seed"], 3);

    r = invoke({"fit", "--obs", dir.str("obs.csv"), "--rct", dir.str("rct.csv"), "--test", dir.str("truth.csv"),
                "--out", dir.str("pred.csv")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const CsvTable pred = read_csv(dir.path() / "pred.csv");
    EXPECT_EQ(pred.columns, (std::vector<std::string>{"row", "cate"}));
    EXPECT_EQ(pred.rows.size(), 200u);
    const nlohmann::json meta = nlohmann::json::parse(slurp(dir.str("pred.csv") + ".meta.json"));
    EXPECT_EQ(meta["beta"].size(), 3u);

    r = invoke({"fit", "--obs", dir.str("obs.csv"), "--out", dir.str("pred.csv")});
    EXPECT_EQ(r.code, kExitInvalidInput);
    r = invoke({"fit", "--obs", dir.str("obs.csv"), "--estimator", "cdd", "--out", dir.str("cdd.csv")});
    EXPECT_EQ(r.code, kExitOk) << r.err;
}

TEST(Run, RepeatedRunsAreIdentical) {
    TempDir dir;
    const std::vector<std::string> base = {"simulate", "--seed", "9", "--n-obs", "80", "--m", "10"};
    auto a = base, b = base;
    a.insert(a.end(), {"--out-dir", dir.str("a")});
    b.insert(b.end(), {"--out-dir", dir.str("b")});
    fs::create_directories(dir.path() / "a");
    fs::create_directories(dir.path() / "b");
    ASSERT_EQ(invoke(a).code, kExitOk);
    ASSERT_EQ(invoke(b).code, kExitOk);
    EXPECT_EQ(slurp(dir.path() / "a" / "obs.csv"), slurp(dir.path() / "b" / "obs.csv"));
    EXPECT_EQ(slurp(dir.path() / "a" / "rct.csv"), slurp(dir.path() / "b" / "rct.csv"));
}

TEST(Run, BenchmarkThenReport) {
    TempDir dir;
    auto r = invoke({"benchmark", "--dims", "1", "--rate", "0,0.9", "--reps", "3", "--estimators",
                     "sdd,cdd,rct,sdd_ols", "--n-obs", "120", "--m", "15", "--threads", "2", "--out-dir",
                     dir.path().string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const ResultsTable t = read_results(dir.path() / "results.csv");
    EXPECT_EQ(t.size(), 4u * 2u * 3u);
    EXPECT_TRUE(fs::exists(dir.path() / "summary.json"));

    const fs::path rep = dir.path() / "rep";
    fs::create_directories(rep);
    r = invoke({"report", dir.str("results.csv"), "--out-dir", rep.string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(slurp(rep / "report.md"), slurp(dir.path() / "report.md"));
    EXPECT_TRUE(fs::exists(rep / "median_vs_rate.csv"));
    EXPECT_TRUE(fs::exists(rep / "skewness_vs_rate.csv"));
}

TEST(Run, ConfigFileAndFlagPrecedence) {
    TempDir dir;
    {
        std::ofstream cfg(dir.path() / "cfg.json");
        cfg << R"({"seed": 5, "n_obs": 40, "m_per_arm": 6})";
    }
    auto r = invoke({"simulate", "--config", dir.str("cfg.json"), "--m", "7", "--out-dir", dir.path().string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(read_csv(dir.path() / "obs.csv").rows.size(), 40u);
    EXPECT_EQ(read_csv(dir.path() / "rct.csv").rows.size(), 14u);

    {
        std::ofstream cfg(dir.path() / "bad.json");
        cfg << R"({"seeds": 5})";
    }
    EXPECT_EQ(invoke({"simulate", "--config", dir.str("bad.json"), "--out-dir", dir.path().string()}).code,
              kExitInvalidInput);
}

TEST(Run, ExitCodes) {
    TempDir dir;
    EXPECT_EQ(invoke({"simulate", "--rate", "1.5"}).code, kExitInvalidInput);
    EXPECT_EQ(invoke({"simulate", "--no-such-flag"}).code, kExitInvalidInput);
    EXPECT_EQ(invoke({"frobnicate"}).code, kExitInvalidInput);
    EXPECT_EQ(invoke({"--version"}).code, kExitOk);

    ASSERT_EQ(invoke({"simulate", "--n-obs", "80", "--m", "10", "--out-dir", dir.path().string()}).code, kExitOk);
    const auto r = invoke({"bootstrap", "--obs", dir.str("obs.csv"), "--rct", dir.str("rct.csv"), "--out-dir",
                           dir.path().string()});
    EXPECT_EQ(r.code, kExitInvalidInput);
    EXPECT_NE(r.err.find("truth"), std::string::npos);

    EXPECT_EQ(invoke({"report", dir.str("missing.csv")}).code, kExitIo);
    EXPECT_EQ(invoke({"simulate", "--out-dir", dir.str("obs.csv")}).code, kExitIo);
}

TEST(Run, BootstrapWithTruth) {
    TempDir dir;
    ASSERT_EQ(invoke({"simulate", "--dims", "1", "--n-obs", "120", "--m", "15", "--out-dir", dir.path().string()})
                  .code,
              kExitOk);
    const auto r = invoke({"bootstrap", "--obs", dir.str("obs.csv"), "--rct", dir.str("rct.csv"), "--truth",
                           dir.str("truth.csv"), "--estimators", "sdd,cdd", "-B", "2", "--out-dir",
                           dir.path().string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const CsvTable b = read_csv(dir.path() / "bootstrap.csv");
    EXPECT_EQ(b.rows.size(), 4u);
}
