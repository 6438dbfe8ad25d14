#include "report.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <vector>

#include "sdd/error.hpp"

namespace sdd::cli {
namespace {

constexpr double kAlpha = 0.05 / 5.0;

std::string fixed4(double v) {
    if (std::isnan(v)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

double median_or_nan(std::vector<double> s) {
    return s.empty() ? std::numeric_limits<double>::quiet_NaN() : median(std::move(s));
}

using SampleFn = std::function<std::vector<double>(std::size_t e, std::size_t col)>;

void append_table(std::string& out, const ResultsTable& table, const std::vector<std::string>& headers,
                  const SampleFn& sample_of) {
    const std::size_t ncol = headers.size();
    const std::size_t ne = table.estimators.size();
    std::vector<std::vector<std::vector<double>>> samples(ncol);
    std::vector<std::optional<ColumnWinner>> winners(ncol);
    for (std::size_t c = 0; c < ncol; ++c) {
        for (std::size_t e = 0; e < ne; ++e) samples[c].push_back(sample_of(e, c));
        winners[c] = best_estimator(table.estimators, samples[c], kAlpha);
    }

    out += "|";
    for (const auto& h : headers) out += " | " + h;
    out += " |\n|---";
    for (std::size_t c = 0; c < ncol; ++c) out += "|---:";
    out += "|\n";

    const auto row = [&](std::size_t e) {
        out += "| " + std::string(display_name(table.estimators[e]));
        for (std::size_t c = 0; c < ncol; ++c) {
            const std::string cell = fixed4(median_or_nan(samples[c][e]));
            const bool bold = winners[c] && winners[c]->significant && winners[c]->estimator == e;
            out += " | " + (bold ? "**" + cell + "**" : cell);
        }
        out += " |\n";
    };
    for (std::size_t e = 0; e < ne; ++e)
        if (!is_ablation(table.estimators[e])) row(e);
    bool any_ablation = false;
    for (std::size_t e = 0; e < ne; ++e)
        if (is_ablation(table.estimators[e])) {
            if (!any_ablation) {
                out += "| - - -";
                for (std::size_t c = 0; c < ncol; ++c) out += " | - - -";
                out += " |\n";
                any_ablation = true;
            }
            row(e);
        }
    out += "\n";
}

std::string rate_label(double r) { return format_double(r); }

std::string csv_estimator_header(const ResultsTable& table) {
    std::string out;
    for (CateKind k : table.estimators) out += "," + std::string(display_name(k));
    return out;
}

}  // namespace

std::string markdown_report(const ResultsTable& table, const FileHeader& header) {
    table.validate();
    std::string out = "<!-- " + header.text() + " -->\n# Benchmark report\n\n";
    out += "Median MSE against the true CATE over " + std::to_string(table.replications) +
           " replication(s). Bold marks the best main estimator of a column when Mood's median "
           "test gives p < 0.05/5 against every other main estimator.\n\n";

    const std::size_t nd = table.dims.size(), nr = table.rates.size();
    if (nr > 1 || nd == 1) {
        std::vector<std::string> headers;
        for (double r : table.rates) headers.push_back("r = " + rate_label(r));
        for (std::size_t d = 0; d < nd; ++d) {
            out += "## d = " + std::to_string(table.dims[d]) + "\n\n";
            append_table(out, table, headers,
                         [&](std::size_t e, std::size_t c) { return table.sample(e, d, c); });
        }
    }
    if (nd > 1) {
        std::vector<std::string> headers;
        for (int d : table.dims) headers.push_back("d = " + std::to_string(d));
        out += nr > 1 ? "## By dimension (pooled over rates)\n\n"
                      : "## By dimension (r = " + rate_label(table.rates[0]) + ")\n\n";
        append_table(out, table, headers,
                     [&](std::size_t e, std::size_t c) { return table.pooled_sample(e, c); });
    }

    const std::size_t failures = table.failure_count();
    out += "## Failures\n\n";
    if (failures == 0) {
        out += "None.\n";
    } else {
        out += std::to_string(failures) + " of " + std::to_string(table.size()) +
               " fits failed and are excluded from the medians.\n\n";
        for (std::size_t e = 0; e < table.estimators.size(); ++e) {
            std::size_t n = 0;
            for (std::size_t d = 0; d < nd; ++d)
                for (std::size_t r = 0; r < nr; ++r)
                    for (std::size_t rep = 0; rep < static_cast<std::size_t>(table.replications); ++rep)
                        n += table.failed[table.index(e, d, r, rep)] ? 1 : 0;
            if (n > 0) out += "- " + std::string(display_name(table.estimators[e])) + ": " + std::to_string(n) + "\n";
        }
    }
    return out;
}

std::string median_vs_rate_csv(const ResultsTable& table, const FileHeader& header) {
    table.validate();
    std::string out = "# " + header.text() + "\ndims,rate" + csv_estimator_header(table) + "\n";
    for (std::size_t d = 0; d < table.dims.size(); ++d)
        for (std::size_t r = 0; r < table.rates.size(); ++r) {
            out += std::to_string(table.dims[d]) + "," + format_double(table.rates[r]);
            for (std::size_t e = 0; e < table.estimators.size(); ++e)
                out += "," + format_double(median_or_nan(table.sample(e, d, r)));
            out += "\n";
        }
    return out;
}

std::string median_vs_dims_csv(const ResultsTable& table, const FileHeader& header) {
    table.validate();
    std::string out = "# " + header.text() + "\ndims" + csv_estimator_header(table) + "\n";
    for (std::size_t d = 0; d < table.dims.size(); ++d) {
        out += std::to_string(table.dims[d]);
        for (std::size_t e = 0; e < table.estimators.size(); ++e)
            out += "," + format_double(median_or_nan(table.pooled_sample(e, d)));
        out += "\n";
    }
    return out;
}

std::string skewness_vs_rate_csv(const ResultsTable& table, const FileHeader& header) {
    table.validate();
    const CateKind series[] = {CateKind::sdd, CateKind::rct, CateKind::sdd_ols};
    std::string out = "# " + header.text() + "\ndims,rate";
    for (CateKind k : series) out += "," + std::string(display_name(k));
    out += "\n";
    for (std::size_t d = 0; d < table.dims.size(); ++d)
        for (std::size_t r = 0; r < table.rates.size(); ++r) {
            out += std::to_string(table.dims[d]) + "," + format_double(table.rates[r]);
            for (CateKind k : series) {
                double v = std::numeric_limits<double>::quiet_NaN();
                if (const auto e = table.estimator_index(k)) {
                    const auto s = table.sample(*e, d, r);
                    try {
                        v = sample_skewness(s);
                    } catch (const UndefinedStatistic&) {
                    }
                }
                out += "," + format_double(v);
            }
            out += "\n";
        }
    return out;
}

}  // namespace sdd::cli
