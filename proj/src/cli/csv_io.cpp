#include "csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "sdd/error.hpp"

namespace sdd::cli {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.emplace_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string comment_line(const FileHeader& h) { return "# " + h.text() + "\n"; }

}  // namespace

std::string FileHeader::text() const {
    return "sdd " + version + " config=" + config_hash + " seed=" + std::to_string(seed);
}

std::optional<FileHeader> parse_header(std::string_view line) {
    std::istringstream in{std::string(line)};
    std::string tool, version, config, seed;
    if (!(in >> tool >> version >> config >> seed) || tool != "sdd") return std::nullopt;
    if (config.rfind("config=", 0) != 0 || seed.rfind("seed=", 0) != 0) return std::nullopt;
    FileHeader h;
    h.version = version;
    h.config_hash = config.substr(7);
    const std::string digits = seed.substr(5);
    const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), h.seed);
    if (res.ec != std::errc{} || res.ptr != digits.data() + digits.size()) return std::nullopt;
    return h;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::ptrdiff_t CsvTable::find(std::string_view column) const {
    const auto it = std::find(columns.begin(), columns.end(), column);
    return it == columns.end() ? -1 : it - columns.begin();
}

std::size_t CsvTable::require(std::string_view column) const {
    const auto i = find(column);
    if (i < 0) throw ParseError(source, 1, 0, "missing column '" + std::string(column) + "'");
    return static_cast<std::size_t>(i);
}

double CsvTable::number(std::size_t row, std::size_t col) const {
    const std::string& s = rows[row][col];
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty())
        throw ParseError(source, line_numbers[row], col + 1,
                         "column '" + columns[col] + "': not a number: '" + s + "'");
    return v;
}

int CsvTable::flag(std::size_t row, std::size_t col) const {
    const std::string& s = rows[row][col];
    if (s == "0") return 0;
    if (s == "1") return 1;
    throw ParseError(source, line_numbers[row], col + 1,
                     "column '" + columns[col] + "' must be 0 or 1, got '" + s + "'");
}

CsvTable parse_csv(std::string_view text, const std::string& source) {
    CsvTable t;
    t.source = source;
    std::size_t line_no = 0;
    bool have_header = false;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '#') {
            t.comments.emplace_back(trim(line.substr(1)));
            continue;
        }
        auto fields = split_fields(line);
        if (!have_header) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (fields[i].empty()) throw ParseError(source, line_no, i + 1, "empty column name");
                if (std::count(fields.begin(), fields.end(), fields[i]) > 1)
                    throw ParseError(source, line_no, i + 1, "duplicate column '" + fields[i] + "'");
            }
            t.columns = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.columns.size())
            throw ParseError(source, line_no, 0,
                             "expected " + std::to_string(t.columns.size()) + " fields, found " +
                                 std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(line_no);
    }
    if (!have_header) throw ParseError(source, line_no, 0, "no header row");
    return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error reading '" + path.string() + "'");
    return parse_csv(ss.str(), path.string());
}

std::vector<std::size_t> covariate_columns(const CsvTable& t) {
    std::map<int, std::size_t> found;
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        const std::string& c = t.columns[i];
        if (c.size() < 2 || c[0] != 'x') continue;
        int k = 0;
        const auto res = std::from_chars(c.data() + 1, c.data() + c.size(), k);
        if (res.ec != std::errc{} || res.ptr != c.data() + c.size() || k < 1) continue;
        found[k] = i;
    }
    if (found.empty()) throw ParseError(t.source, 1, 0, "no covariate columns x1..xd");
    std::vector<std::size_t> out;
    int expect = 1;
    for (const auto& [k, i] : found) {
        if (k != expect)
            throw ParseError(t.source, 1, i + 1, "covariate columns must be x1..xd without gaps; missing x" +
                                                     std::to_string(expect));
        out.push_back(i);
        ++expect;
    }
    return out;
}

Eigen::MatrixXd read_covariates(const CsvTable& t) {
    const auto cols = covariate_columns(t);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const double v = t.number(r, cols[j]);
            if (!std::isfinite(v))
                throw ParseError(t.source, t.line_numbers[r], cols[j] + 1, "non-finite covariate");
            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v;
        }
    return X;
}

PanelDataset read_panel(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    if (t.rows.empty()) throw ParseError(t.source, 1, 0, "no data rows");
    const std::size_t ct = t.require("t"), cm = t.require("m"), cy = t.require("y");
    PanelDataset data;
    data.covariates = read_covariates(t);
    const auto n = static_cast<Eigen::Index>(t.rows.size());
    data.treatment.resize(n);
    data.timepoint.resize(n);
    data.outcome.resize(n);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto i = static_cast<Eigen::Index>(r);
        data.treatment[i] = t.flag(r, ct);
        data.timepoint[i] = t.flag(r, cm);
        data.outcome[i] = t.number(r, cy);
        if (!std::isfinite(data.outcome[i]))
            throw ParseError(t.source, t.line_numbers[r], cy + 1, "non-finite outcome");
    }
    return data;
}

TruthTable read_truth(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    if (t.rows.empty()) throw ParseError(t.source, 1, 0, "no data rows");
    const std::size_t cc = t.require("cate");
    TruthTable truth;
    truth.points = read_covariates(t);
    truth.cate.resize(static_cast<Eigen::Index>(t.rows.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) truth.cate[static_cast<Eigen::Index>(r)] = t.number(r, cc);
    return truth;
}

std::string panel_csv(const PanelDataset& data, const FileHeader& header) {
    std::string out = comment_line(header);
    for (Eigen::Index j = 0; j < data.dims(); ++j) out += "x" + std::to_string(j + 1) + ",";
    out += "t,m,y\n";
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.dims(); ++j) out += format_double(data.covariates(i, j)) + ",";
        out += std::to_string(data.treatment[i]) + "," + std::to_string(data.timepoint[i]) + "," +
               format_double(data.outcome[i]) + "\n";
    }
    return out;
}

std::string truth_csv(const Eigen::MatrixXd& X, const Eigen::VectorXd& cate, const FileHeader& header) {
    std::string out = comment_line(header);
    for (Eigen::Index j = 0; j < X.cols(); ++j) out += "x" + std::to_string(j + 1) + ",";
    out += "cate\n";
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) out += format_double(X(i, j)) + ",";
        out += format_double(cate[i]) + "\n";
    }
    return out;
}

std::string predictions_csv(const Eigen::VectorXd& cate, const FileHeader& header) {
    std::string out = comment_line(header) + "row,cate\n";
    for (Eigen::Index i = 0; i < cate.size(); ++i)
        out += std::to_string(i) + "," + format_double(cate[i]) + "\n";
    return out;
}

std::string results_csv(const ResultsTable& table, const FileHeader& header) {
    table.validate();
    std::string out = comment_line(header) + "estimator,dims,rate,rep,mse,failed\n";
    for (std::size_t e = 0; e < table.estimators.size(); ++e)
        for (std::size_t d = 0; d < table.dims.size(); ++d)
            for (std::size_t r = 0; r < table.rates.size(); ++r)
                for (std::size_t rep = 0; rep < static_cast<std::size_t>(table.replications); ++rep) {
                    const std::size_t i = table.index(e, d, r, rep);
                    out += std::string(kind_name(table.estimators[e])) + "," + std::to_string(table.dims[d]) +
                           "," + format_double(table.rates[r]) + "," + std::to_string(rep) + "," +
                           (table.failed[i] ? std::string() : format_double(table.mse[i])) + "," +
                           (table.failed[i] ? "1" : "0") + "\n";
                }
    return out;
}

ResultsTable parse_results(const CsvTable& t) {
    if (t.rows.empty()) throw InvalidInput(t.source + ": results file has no data rows");
    const std::size_t ce = t.require("estimator"), cd = t.require("dims"), cr = t.require("rate"),
                      crep = t.require("rep"), cv = t.require("mse"), cf = t.require("failed");
    struct Entry {
        std::size_t e, d, r, rep;
        double mse;
        bool failed;
    };
    ResultsTable table;
    std::vector<Entry> entries;
    int max_rep = -1;
    const auto slot = [](auto& axis, const auto& v) {
        const auto it = std::find(axis.begin(), axis.end(), v);
        if (it != axis.end()) return static_cast<std::size_t>(it - axis.begin());
        axis.push_back(v);
        return axis.size() - 1;
    };
    for (std::size_t row = 0; row < t.rows.size(); ++row) {
        CateKind kind;
        try {
            kind = parse_kind(t.rows[row][ce]);
        } catch (const InvalidInput& err) {
            throw ParseError(t.source, t.line_numbers[row], ce + 1, err.what());
        }
        const double dv = t.number(row, cd);
        const double rep_v = t.number(row, crep);
        if (dv < 1 || dv != std::floor(dv))
            throw ParseError(t.source, t.line_numbers[row], cd + 1, "dims must be a positive integer");
        if (rep_v < 0 || rep_v != std::floor(rep_v) || rep_v > 1e7)
            throw ParseError(t.source, t.line_numbers[row], crep + 1, "rep must be a non-negative integer");
        const bool failed = t.flag(row, cf) == 1;
        Entry en{slot(table.estimators, kind), slot(table.dims, static_cast<int>(dv)),
                 slot(table.rates, t.number(row, cr)), static_cast<std::size_t>(rep_v), 0.0, failed};
        if (!failed) {
            en.mse = t.number(row, cv);
            if (!std::isfinite(en.mse) || en.mse < 0)
                throw ParseError(t.source, t.line_numbers[row], cv + 1, "mse must be finite and >= 0");
        }
        max_rep = std::max(max_rep, static_cast<int>(en.rep));
        entries.push_back(en);
    }
    table.replications = max_rep + 1;
    table.allocate();
    std::fill(table.failed.begin(), table.failed.end(), char{1});
    std::vector<char> seen(table.size(), 0);
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const Entry& en = entries[k];
        const std::size_t i = table.index(en.e, en.d, en.r, en.rep);
        if (seen[i]) throw ParseError(t.source, t.line_numbers[k], 0, "duplicate result row");
        seen[i] = 1;
        table.failed[i] = en.failed ? 1 : 0;
        table.mse[i] = en.failed ? std::nan("") : en.mse;
    }
    return table;
}

ResultsTable read_results(const std::filesystem::path& path) { return parse_results(read_csv(path)); }

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        out.flush();
        if (!out) throw IoError("error writing '" + path.string() + "'");
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

}  // namespace sdd::cli
