#include "sdd/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <thread>

#include "sdd/error.hpp"
#include "sdd/seeding.hpp"

namespace sdd {

void GridSpec::validate() const {
    if (dims.empty() || rates.empty() || estimators.empty())
        throw InvalidInput("benchmark grid has an empty axis");
    if (replications < 1) throw InvalidInput("replications must be >= 1");
    if (threads < 1) throw InvalidInput("threads must be >= 1");
    for (int d : dims)
        if (d < 1) throw InvalidInput("dims must be >= 1");
    for (double r : rates)
        if (!(r >= 0.0 && r < 1.0)) throw InvalidInput("exclusion rates must lie in [0, 1)");
    dgp.validate();
}

std::uint64_t replication_seed(std::uint64_t base, int dims, double rate, int rep) {
    const auto rate_key = static_cast<std::uint64_t>(std::llround(rate * 10000.0));
    return derive_seed(base, {static_cast<std::uint64_t>(dims), rate_key, static_cast<std::uint64_t>(rep)});
}

ResultsTable run_grid(const GridSpec& spec) {
    spec.validate();
    ResultsTable table;
    table.estimators = spec.estimators;
    table.dims = spec.dims;
    table.rates = spec.rates;
    table.replications = spec.replications;
    table.base_seed = spec.base_seed;
    table.allocate();

    const std::size_t nd = spec.dims.size(), nr = spec.rates.size();
    const std::size_t nrep = static_cast<std::size_t>(spec.replications);
    const std::size_t jobs = nd * nr * nrep;
    std::vector<std::string> notes(jobs * spec.estimators.size());

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t job = next++; job < jobs; job = next++) {
            const std::size_t rep = job % nrep;
            const std::size_t r = (job / nrep) % nr;
            const std::size_t d = job / (nrep * nr);
            const std::uint64_t seed =
                replication_seed(spec.base_seed, spec.dims[d], spec.rates[r], static_cast<int>(rep));
            DgpConfig dgp = spec.dgp;
            dgp.dims = spec.dims[d];
            dgp.exclusion_rate = spec.rates[r];
            dgp.seed = seed;
            EstimatorConfig cfg = spec.estimator;
            cfg.seed = derive_seed(seed, "estimators");

            const SyntheticProblem problem = draw_problem(dgp);
            const Eigen::VectorXd truth = problem.truth.cate(problem.obs.covariates);
            FitCache cache(problem.obs, &problem.rct, cfg);
            for (std::size_t e = 0; e < spec.estimators.size(); ++e) {
                const std::size_t i = table.index(e, d, r, rep);
                try {
                    const CateModel model = cache.fit(spec.estimators[e]);
                    const double v = mse(model.evaluate(problem.obs.covariates), truth);
                    if (!std::isfinite(v)) throw NumericalRankError("non-finite MSE");
                    table.mse[i] = v;
                } catch (const Error& err) {
                    table.failed[i] = 1;
                    table.mse[i] = std::nan("");
                    notes[job * spec.estimators.size() + e] =
                        std::string(kind_name(spec.estimators[e])) + " d=" + std::to_string(spec.dims[d]) +
                        " r=" + std::to_string(spec.rates[r]) + " rep=" + std::to_string(rep) + ": " +
                        err.what();
                }
            }
        }
    };

    const int n_threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(spec.threads), jobs));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& n : notes)
        if (!n.empty()) table.failure_notes.push_back(std::move(n));
    return table;
}

}  // namespace sdd
