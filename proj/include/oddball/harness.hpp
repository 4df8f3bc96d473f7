#ifndef ODDBALL_HARNESS_HPP
#define ODDBALL_HARNESS_HPP

// Monte Carlo drivers: threshold sweeps with error-rate and stopping-time
// statistics, and long non-stopping runs for drift and convergence checks.
// Every trial draws from its own derived stream and results are merged in
// index order, so output does not depend on the number of workers.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include <boost/math/distributions/beta.hpp>

#include "oddball/core_math.hpp"
#include "oddball/glr.hpp"
#include "oddball/lambda_solver.hpp"
#include "oddball/policy.hpp"
#include "oddball/random.hpp"

namespace oddball {

/// Run fn(0..count-1) on `jobs` worker threads. The first exception thrown
/// by any task is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Exact (Clopper-Pearson) two-sided binomial interval.
struct BinomialInterval {
    double lo = 0.0;
    double hi = 1.0;
};

inline BinomialInterval clopper_pearson(std::uint64_t successes, std::uint64_t trials, double confidence = 0.95) {
    if (trials == 0) throw std::invalid_argument("clopper_pearson: no trials");
    if (successes > trials) throw std::invalid_argument("clopper_pearson: successes > trials");
    const double tail = 0.5 * (1.0 - confidence);
    const auto x = static_cast<double>(successes);
    const auto n = static_cast<double>(trials);
    BinomialInterval ci;
    ci.lo = successes == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<double>(x, n - x + 1.0), tail);
    ci.hi = successes == trials ? 1.0
                                : boost::math::quantile(boost::math::beta_distribution<double>(x + 1.0, n - x), 1.0 - tail);
    return ci;
}

struct ExperimentSpec {
    OddConfig truth;
    std::vector<double> l_grid;
    std::uint64_t trials_per_point = 100;
    std::uint64_t seed = 0;
    double trace_sampling = 0.0;
    std::uint64_t max_slots = kDefaultMaxSlots;

    void validate() const {
        if (!truth.is_scalar()) throw std::invalid_argument("ExperimentSpec: simulation needs scalar rates");
        if (truth.is_degenerate()) throw std::invalid_argument("ExperimentSpec: r1 must differ from r2");
        if (l_grid.empty()) throw std::invalid_argument("ExperimentSpec: l_grid is empty");
        for (std::size_t i = 0; i < l_grid.size(); ++i) {
            if (!(l_grid[i] > 1.0) || !std::isfinite(l_grid[i]))
                throw std::invalid_argument("ExperimentSpec: every L must be finite and > 1");
            if (i > 0 && !(l_grid[i] > l_grid[i - 1]))
                throw std::invalid_argument("ExperimentSpec: l_grid must be strictly increasing");
        }
        if (trials_per_point == 0) throw std::invalid_argument("ExperimentSpec: trials must be positive");
        if (!(trace_sampling >= 0.0 && trace_sampling <= 1.0))
            throw std::invalid_argument("ExperimentSpec: trace_sampling must lie in [0,1]");
        if (max_slots == 0) throw std::invalid_argument("ExperimentSpec: max_slots must be positive");
    }
};

struct ReportRow {
    double l = 0.0;
    double threshold = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t errors = 0;     // wrong declarations plus capped trials
    double error_rate = 0.0;
    double error_ci_hi = 0.0;     // Clopper-Pearson 95% upper bound
    double mean_tau = 0.0;        // over uncapped trials
    double se_tau = 0.0;
    double tau_over_ln_l = 0.0;
    double lower_bound = 0.0;     // d_b(1/L, 1-1/L) / D*
    double inv_dstar = 0.0;
    std::uint64_t capped = 0;
};

/// A traced trial kept for trace export, with its grid coordinates.
struct TracedTrial {
    std::size_t l_index = 0;
    std::uint64_t trial_index = 0;
    TrialOutcome outcome;
};

struct ExperimentReport {
    double d_star = 0.0;
    std::vector<ReportRow> rows;
    std::vector<TracedTrial> traces;
};

/// Stream seed for trial `trial` at grid point `l_index`.
inline std::uint64_t trial_seed(std::uint64_t seed, std::size_t l_index, std::uint64_t trial) {
    return derive_seed(seed, {static_cast<std::uint64_t>(l_index), trial});
}

inline bool trial_is_traced(const ExperimentSpec& spec, std::size_t l_index, std::uint64_t trial) {
    if (spec.trace_sampling <= 0.0) return false;
    if (spec.trace_sampling >= 1.0) return true;
    Stream pick(derive_seed(spec.seed, {static_cast<std::uint64_t>(l_index), trial, 0x7472616365ULL}));
    return pick.uniform() < spec.trace_sampling;
}

inline ReportRow summarize_point(const ExperimentSpec& spec, double d_star_value, double l,
                                 const std::vector<TrialOutcome>& outcomes) {
    ReportRow row;
    row.l = l;
    row.threshold = std::log(static_cast<double>(spec.truth.k - 1) * l);
    row.trials = outcomes.size();
    double sum = 0.0;
    double sum_sq = 0.0;
    std::uint64_t finished = 0;
    for (const TrialOutcome& o : outcomes) {
        if (o.capped) {
            ++row.capped;
            ++row.errors;
            continue;
        }
        if (!o.correct) ++row.errors;
        const auto t = static_cast<double>(o.tau);
        sum += t;
        sum_sq += t * t;
        ++finished;
    }
    row.error_rate = static_cast<double>(row.errors) / static_cast<double>(row.trials);
    row.error_ci_hi = clopper_pearson(row.errors, row.trials).hi;
    if (finished > 0) {
        const auto m = static_cast<double>(finished);
        row.mean_tau = sum / m;
        if (finished > 1) {
            const double var = std::max(0.0, (sum_sq - m * row.mean_tau * row.mean_tau) / (m - 1.0));
            row.se_tau = std::sqrt(var / m);
        }
    } else {
        row.mean_tau = std::numeric_limits<double>::quiet_NaN();
        row.se_tau = std::numeric_limits<double>::quiet_NaN();
    }
    row.tau_over_ln_l = row.mean_tau / std::log(l);
    row.lower_bound = 1.0 / l < 0.5 ? binary_relative_entropy(1.0 / l) / d_star_value : 0.0;
    row.inv_dstar = 1.0 / d_star_value;
    return row;
}

inline ExperimentReport run_experiment(const ExperimentSpec& spec, std::size_t parallelism) {
    spec.validate();
    const std::size_t points = spec.l_grid.size();
    const std::uint64_t trials = spec.trials_per_point;

    ExperimentReport report;
    report.d_star = d_star(spec.truth);

    std::vector<TrialOutcome> outcomes(points * trials);
    parallel_for(outcomes.size(), parallelism, [&](std::size_t task) {
        const std::size_t l_index = task / trials;
        const std::uint64_t trial = task % trials;
        const bool traced = trial_is_traced(spec, l_index, trial);
        auto config = PolicyConfig::make(spec.truth.k, spec.l_grid[l_index], Variant::standard, 0, std::nullopt,
                                         spec.max_slots, traced);
        outcomes[task] = run_trial(config, spec.truth, Stream(trial_seed(spec.seed, l_index, trial)));
        if (!traced) outcomes[task].final_stats = SufficientStats(1);
    });

    for (std::size_t p = 0; p < points; ++p) {
        std::vector<TrialOutcome> slice(std::make_move_iterator(outcomes.begin() + p * trials),
                                        std::make_move_iterator(outcomes.begin() + (p + 1) * trials));
        report.rows.push_back(summarize_point(spec, report.d_star, spec.l_grid[p], slice));
        for (std::uint64_t t = 0; t < trials; ++t)
            if (slice[t].traced) report.traces.push_back({p, t, std::move(slice[t])});
    }
    return report;
}

struct DriftSpec {
    OddConfig truth;
    std::uint64_t n_slots = 200'000;
    std::vector<std::uint64_t> seeds;
    std::vector<std::uint64_t> checkpoints;  // defaults to {n_slots}

    [[nodiscard]] std::vector<std::uint64_t> effective_checkpoints() const {
        std::vector<std::uint64_t> cps = checkpoints;
        if (cps.empty() || cps.back() != n_slots) cps.push_back(n_slots);
        return cps;
    }
};

/// Snapshot of one non-stopping run at a checkpoint.
struct DriftRow {
    std::uint64_t seed = 0;
    std::uint64_t n = 0;
    std::size_t leader = 0;
    double z_true_over_n = 0.0;           // Z_i(n)/n for the true odd index i
    std::vector<double> frequency;        // N_j / n
    std::vector<double> rate_hat;         // Y_j / N_j (0 if unvisited)
    std::vector<double> complement_rate;  // (Y - Y_j) / (n - N_j)
};

struct DriftSummary {
    double median_z_rel_err = 0.0;         // |Z_i/n - D*| / D*, median over seeds
    double max_frequency_err = 0.0;        // max over seeds of ||N/n - lambda*||_inf
    double leader_correct_fraction = 0.0;
    double max_complement_rel_err = 0.0;   // max over seeds, j != i, vs mixed rate
    double max_odd_rate_rel_err = 0.0;     // Y_i/N_i vs R1
    double max_non_odd_rate_rel_err = 0.0; // Y_j/N_j vs R2, j != i
    std::vector<bool> anti_drift;          // per seed: Z_j(n) < 0 for every j != i
};

struct DriftReport {
    double d_star = 0.0;
    LambdaSolution lambda;
    std::vector<DriftRow> rows;  // seed-major, checkpoints in order
    DriftSummary final_summary;  // at the last checkpoint
};

inline DriftSummary summarize_drift(const DriftReport& report, const OddConfig& truth, std::uint64_t at_n,
                                    const std::vector<std::vector<double>>& final_z_min) {
    DriftSummary s;
    std::vector<double> z_errs;
    std::size_t correct = 0;
    const std::size_t odd = truth.odd_index;
    const double r_tilde = report.lambda.r_tilde[0];
    for (const DriftRow& row : report.rows) {
        if (row.n != at_n) continue;
        z_errs.push_back(std::abs(row.z_true_over_n - report.d_star) / report.d_star);
        if (row.leader == odd) ++correct;
        for (std::size_t j = 0; j < truth.k; ++j) {
            s.max_frequency_err = std::max(s.max_frequency_err, std::abs(row.frequency[j] - report.lambda.lambda[j]));
            if (j == odd) {
                s.max_odd_rate_rel_err = std::max(s.max_odd_rate_rel_err, std::abs(row.rate_hat[j] / truth.r1[0] - 1.0));
            } else {
                s.max_complement_rel_err =
                    std::max(s.max_complement_rel_err, std::abs(row.complement_rate[j] / r_tilde - 1.0));
                s.max_non_odd_rate_rel_err =
                    std::max(s.max_non_odd_rate_rel_err, std::abs(row.rate_hat[j] / truth.r2[0] - 1.0));
            }
        }
    }
    if (!z_errs.empty()) {
        std::sort(z_errs.begin(), z_errs.end());
        const std::size_t m = z_errs.size();
        s.median_z_rel_err = m % 2 == 1 ? z_errs[m / 2] : 0.5 * (z_errs[m / 2 - 1] + z_errs[m / 2]);
        s.leader_correct_fraction = static_cast<double>(correct) / static_cast<double>(m);
    }
    for (const auto& z_min : final_z_min) {
        bool negative = true;
        for (std::size_t j = 0; j < z_min.size(); ++j)
            if (j != odd && !(z_min[j] < 0.0)) negative = false;
        s.anti_drift.push_back(negative);
    }
    return s;
}

/// Non-stopping runs of n_slots per seed, sampled at checkpoints.
inline DriftReport drift_experiment(const DriftSpec& spec, std::size_t parallelism = 1) {
    if (!spec.truth.is_scalar()) throw std::invalid_argument("drift_experiment: scalar rates only");
    if (spec.truth.is_degenerate()) throw std::invalid_argument("drift_experiment: r1 must differ from r2");
    if (spec.n_slots == 0) throw std::invalid_argument("drift_experiment: n_slots must be positive");
    if (spec.seeds.empty()) throw std::invalid_argument("drift_experiment: no seeds");
    const auto checkpoints = spec.effective_checkpoints();
    for (std::size_t c = 0; c < checkpoints.size(); ++c)
        if (checkpoints[c] == 0 || checkpoints[c] > spec.n_slots || (c > 0 && checkpoints[c] <= checkpoints[c - 1]))
            throw std::invalid_argument("drift_experiment: checkpoints must be increasing within [1, n_slots]");

    DriftReport report;
    report.lambda = solve_lambda_star(spec.truth);
    report.d_star = report.lambda.d_star;

    const std::size_t k = spec.truth.k;
    std::vector<std::vector<DriftRow>> per_seed(spec.seeds.size());
    std::vector<std::vector<double>> final_z_min(spec.seeds.size());
    parallel_for(spec.seeds.size(), parallelism, [&](std::size_t s) {
        const auto config = PolicyConfig::make(k, 1.0, Variant::non_stopping, 0, std::nullopt, spec.n_slots);
        Trial trial(config, spec.truth, Stream(spec.seeds[s]));
        std::size_t next_cp = 0;
        while (!trial.finished()) {
            trial.step();
            const SufficientStats& st = trial.stats();
            if (next_cp >= checkpoints.size() || st.slots() != checkpoints[next_cp]) continue;
            ++next_cp;
            DriftRow row;
            row.seed = spec.seeds[s];
            row.n = st.slots();
            row.leader = trial.glr().leader;
            const auto n = static_cast<double>(row.n);
            row.z_true_over_n = trial.glr().z_min[spec.truth.odd_index] / n;
            for (std::size_t j = 0; j < k; ++j) {
                const auto nj = static_cast<double>(st.visits(j));
                row.frequency.push_back(nj / n);
                row.rate_hat.push_back(nj > 0 ? static_cast<double>(st.events(j)) / nj : 0.0);
                const double rest = n - nj;
                row.complement_rate.push_back(
                    rest > 0 ? static_cast<double>(st.total_events() - st.events(j)) / rest : 0.0);
            }
            per_seed[s].push_back(std::move(row));
        }
        final_z_min[s] = trial.glr().z_min;
    });
    for (auto& rows : per_seed)
        for (auto& row : rows) report.rows.push_back(std::move(row));
    report.final_summary = summarize_drift(report, spec.truth, spec.n_slots, final_z_min);
    return report;
}

}  // namespace oddball

#endif  // ODDBALL_HARNESS_HPP
