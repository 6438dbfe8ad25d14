#include "sdd/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "sdd/error.hpp"
#include "sdd/seeding.hpp"

namespace sdd {

double mse(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size())
        throw InvalidInput("mse: length mismatch (" + std::to_string(pred.size()) + " vs " +
                           std::to_string(truth.size()) + ")");
    if (pred.empty()) throw InvalidInput("mse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - truth[i];
        acc += e * e;
    }
    return acc / static_cast<double>(pred.size());
}

double mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    return mse(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
               std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())));
}

double median(std::vector<double> values) {
    if (values.empty()) throw InvalidInput("median of an empty sample");
    const std::size_t n = values.size();
    const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(values.begin(), mid, values.end());
    const double upper = *mid;
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), mid);
    return 0.5 * (lower + upper);
}

void ResultsTable::allocate() {
    const std::size_t n = estimators.size() * dims.size() * rates.size() *
                          static_cast<std::size_t>(std::max(replications, 0));
    mse.assign(n, 0.0);
    failed.assign(n, 0);
}

std::size_t ResultsTable::index(std::size_t e, std::size_t d, std::size_t r, std::size_t rep) const {
    return ((e * dims.size() + d) * rates.size() + r) * static_cast<std::size_t>(replications) + rep;
}

std::size_t ResultsTable::failure_count() const {
    return static_cast<std::size_t>(std::count(failed.begin(), failed.end(), char{1}));
}

std::vector<double> ResultsTable::sample(std::size_t e, std::size_t d, std::size_t r) const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(replications));
    for (std::size_t rep = 0; rep < static_cast<std::size_t>(replications); ++rep) {
        const std::size_t i = index(e, d, r, rep);
        if (!failed[i]) out.push_back(mse[i]);
    }
    return out;
}

std::vector<double> ResultsTable::pooled_sample(std::size_t e, std::size_t d) const {
    std::vector<double> out;
    for (std::size_t r = 0; r < rates.size(); ++r) {
        const auto s = sample(e, d, r);
        out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

std::optional<std::size_t> ResultsTable::estimator_index(CateKind k) const {
    const auto it = std::find(estimators.begin(), estimators.end(), k);
    if (it == estimators.end()) return std::nullopt;
    return static_cast<std::size_t>(it - estimators.begin());
}

void ResultsTable::validate() const {
    if (estimators.empty() || dims.empty() || rates.empty() || replications < 1)
        throw InvalidInput("results table has an empty axis");
    const std::size_t n =
        estimators.size() * dims.size() * rates.size() * static_cast<std::size_t>(replications);
    if (mse.size() != n || failed.size() != n)
        throw InvalidInput("results table storage does not match its axes");
}

AggregateTable median_over_replications(const ResultsTable& table) {
    table.validate();
    AggregateTable agg;
    agg.estimators = table.estimators;
    agg.dims = table.dims;
    agg.rates = table.rates;
    const std::size_t cells = table.estimators.size() * table.dims.size() * table.rates.size();
    agg.medians.assign(cells, std::numeric_limits<double>::quiet_NaN());
    agg.counts.assign(cells, 0);
    for (std::size_t e = 0; e < table.estimators.size(); ++e)
        for (std::size_t d = 0; d < table.dims.size(); ++d)
            for (std::size_t r = 0; r < table.rates.size(); ++r) {
                auto s = table.sample(e, d, r);
                const std::size_t i = agg.index(e, d, r);
                agg.counts[i] = static_cast<int>(s.size());
                if (!s.empty()) agg.medians[i] = median(std::move(s));
            }
    return agg;
}

double yates_chi_square(double a, double b, double c, double d) {
    const double n = a + b + c + d;
    const double margins = (a + b) * (c + d) * (a + c) * (b + d);
    if (!(margins > 0.0)) return 0.0;
    const double diff = std::max(0.0, std::abs(a * d - b * c) - n / 2.0);
    return n * diff * diff / margins;
}

double chi_square_1df_sf(double statistic) {
    if (!(statistic > 0.0)) return 1.0;
    return std::erfc(std::sqrt(statistic / 2.0));
}

MoodTest moods_median_test_detail(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw InvalidInput("Mood's median test needs two non-empty samples");
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    for (double v : pooled)
        if (!std::isfinite(v)) throw InvalidInput("Mood's median test: non-finite value");

    MoodTest t;
    t.grand_median = median(pooled);
    for (double v : a) (v > t.grand_median ? t.a_above : t.a_not_above)++;
    for (double v : b) (v > t.grand_median ? t.b_above : t.b_not_above)++;
    t.statistic = yates_chi_square(static_cast<double>(t.a_above), static_cast<double>(t.b_above),
                                   static_cast<double>(t.a_not_above),
                                   static_cast<double>(t.b_not_above));
    t.p_value = std::clamp(chi_square_1df_sf(t.statistic), 0.0, 1.0);
    return t;
}

double moods_median_test(std::span<const double> a, std::span<const double> b) {
    return moods_median_test_detail(a, b).p_value;
}

double sample_skewness(std::span<const double> sample) {
    const std::size_t n = sample.size();
    if (n < 3) throw UndefinedStatistic("skewness needs at least 3 values, got " + std::to_string(n));
    double mean = 0.0;
    for (double v : sample) mean += v;
    mean /= static_cast<double>(n);
    double m2 = 0.0, m3 = 0.0;
    for (double v : sample) {
        const double c = v - mean;
        m2 += c * c;
        m3 += c * c * c;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    if (!(m2 > 0.0) || m2 <= 1e-300) throw UndefinedStatistic("skewness of a constant sample");
    const double g1 = m3 / std::pow(m2, 1.5);
    const double nn = static_cast<double>(n);
    return g1 * std::sqrt(nn * (nn - 1.0)) / (nn - 2.0);
}

std::optional<ColumnWinner> best_estimator(const std::vector<CateKind>& kinds,
                                           const std::vector<std::vector<double>>& samples,
                                           double alpha) {
    if (kinds.size() != samples.size()) throw InvalidInput("one sample per estimator is required");
    std::vector<std::size_t> roster;
    for (std::size_t e = 0; e < kinds.size(); ++e)
        if (!is_ablation(kinds[e]) && !samples[e].empty()) roster.push_back(e);
    if (roster.empty()) return std::nullopt;

    std::size_t best = roster[0];
    double best_median = median(samples[best]);
    for (std::size_t e : roster) {
        const double m = median(samples[e]);
        if (m < best_median) {
            best_median = m;
            best = e;
        }
    }
    ColumnWinner w{best, roster.size() > 1};
    for (std::size_t e : roster) {
        if (e == best) continue;
        if (!(moods_median_test(samples[best], samples[e]) < alpha)) {
            w.significant = false;
            break;
        }
    }
    return w;
}

std::optional<ColumnWinner> column_winner(const ResultsTable& table, std::size_t d, std::size_t r,
                                          double alpha) {
    std::vector<std::vector<double>> samples;
    for (std::size_t e = 0; e < table.estimators.size(); ++e) samples.push_back(table.sample(e, d, r));
    return best_estimator(table.estimators, samples, alpha);
}

namespace {

std::vector<Eigen::Index> stratified_resample(const std::vector<std::vector<Eigen::Index>>& strata,
                                              std::mt19937_64& rng) {
    std::vector<Eigen::Index> out;
    for (const auto& s : strata) {
        if (s.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, s.size() - 1);
        for (std::size_t i = 0; i < s.size(); ++i) out.push_back(s[pick(rng)]);
    }
    return out;
}

}  // namespace

BootstrapResult bootstrap_compare(const PanelDataset& obs, const PanelDataset* rct,
                                  const std::vector<CateKind>& estimators,
                                  const std::optional<TruthReference>& truth,
                                  const BootstrapOptions& options) {
    if (!truth)
        throw UnsupportedEvaluation(
            "bootstrap scoring needs a ground-truth CATE reference; none was supplied");
    if (options.replicates < 1) throw InvalidInput("bootstrap needs at least one replicate");
    if (estimators.empty()) throw InvalidInput("bootstrap needs at least one estimator");
    if (truth->points.rows() != truth->cate.size() || truth->points.rows() < 1)
        throw InvalidInput("truth reference points and CATE values differ in length");
    obs.validate();
    if (truth->points.cols() != obs.dims())
        throw InvalidInput("truth reference has " + std::to_string(truth->points.cols()) +
                           " covariates, data has " + std::to_string(obs.dims()));
    bool needs_rct = false;
    for (CateKind k : estimators) needs_rct = needs_rct || uses_rct(k);
    if (needs_rct && rct == nullptr) throw InvalidInput("selected estimators need trial data");
    if (rct) rct->validate_rct();

    std::vector<std::vector<Eigen::Index>> obs_strata;
    for (Cell c : kAllCells) obs_strata.push_back(obs.rows_where(c));
    std::vector<std::vector<Eigen::Index>> rct_strata;
    if (rct) {
        rct_strata.push_back(rct->rows_where(1, 1));
        rct_strata.push_back(rct->rows_where(0, 1));
    }

    BootstrapResult result;
    result.estimators = estimators;
    result.mse.assign(estimators.size(),
                      std::vector<double>(static_cast<std::size_t>(options.replicates),
                                          std::numeric_limits<double>::quiet_NaN()));
    result.failures.assign(estimators.size(), 0);

    for (int b = 0; b < options.replicates; ++b) {
        std::mt19937_64 rng(derive_seed(options.seed, {static_cast<std::uint64_t>(b)}));
        PanelDataset obs_b = options.identity_resample ? obs : obs.select(stratified_resample(obs_strata, rng));
        std::optional<PanelDataset> rct_b;
        if (rct)
            rct_b = options.identity_resample ? *rct : rct->select(stratified_resample(rct_strata, rng));
        FitCache cache(obs_b, rct_b ? &*rct_b : nullptr, options.estimator);
        for (std::size_t e = 0; e < estimators.size(); ++e) {
            try {
                const CateModel model = cache.fit(estimators[e]);
                result.mse[e][static_cast<std::size_t>(b)] = mse(model.evaluate(truth->points), truth->cate);
            } catch (const Error&) {
                ++result.failures[e];
            }
        }
    }
    return result;
}

}  // namespace sdd
