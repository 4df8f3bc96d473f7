// Command-line front end. Process and image indices are 1-based on the
// command line and in every file; exit codes are 0 on success, 2 on input
// error and 1 on runtime failure.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oddball.hpp"

namespace {

using nlohmann::ordered_json;
using namespace oddball;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitInput = 2;

struct RuntimeFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Output {
public:
    explicit Output(const std::string& path) {
        if (path.empty() || path == "-") return;
        file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
        if (!*file_) throw RuntimeFailure("cannot open '" + path + "' for writing");
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }
    void close() {
        stream().flush();
        if (!stream()) throw RuntimeFailure("write failed");
    }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    return in;
}

// Input validation failures from the library surface as these types.
template <typename Fn>
auto as_input(Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    } catch (const std::out_of_range& e) {
        throw InputError(e.what());
    } catch (const std::domain_error& e) {
        throw InputError(e.what());
    }
}

std::string dump(const ordered_json& j) { return j.dump(); }

ordered_json numbers(const std::vector<double>& v) {
    ordered_json a = ordered_json::array();
    for (double x : v) a.push_back(x);
    return a;
}

struct RateArgs {
    std::int64_t k = 0;
    std::int64_t odd_index = 1;
    std::vector<double> r1;
    std::vector<double> r2;

    void add_to(CLI::App* cmd, bool with_odd_index) {
        cmd->add_option("--k", k, "number of processes (>= 3)")->required();
        cmd->add_option("--r1", r1, "odd rate(s), comma separated")->required()->delimiter(',');
        cmd->add_option("--r2", r2, "non-odd rate(s), comma separated")->required()->delimiter(',');
        if (with_odd_index) cmd->add_option("--odd-index", odd_index, "odd process index, 1-based");
    }

    [[nodiscard]] OddConfig config() const {
        if (k < 3) throw InputError("--k must be at least 3");
        if (odd_index < 1 || odd_index > k) throw InputError("--odd-index must lie in [1, k]");
        return as_input([&] {
            return OddConfig::make(static_cast<std::size_t>(k), static_cast<std::size_t>(odd_index - 1), r1, r2);
        });
    }
};

ordered_json solution_json(const OddConfig& config, const LambdaSolution& sol) {
    ordered_json j;
    j["d_star"] = sol.d_star;
    j["lambda_odd"] = sol.lambda_odd;
    j["lambda_vector"] = numbers(sol.lambda);
    j["r_tilde"] = numbers(sol.r_tilde);
    if (sol.nu) j["nu"] = *sol.nu;
    if (config.is_degenerate()) j["warning"] = "r1 equals r2: D* is 0 and lambda is the continuous extension";
    return j;
}

void cmd_dstar(const RateArgs& args, const std::string& out_path) {
    const OddConfig config = args.config();
    Output out(out_path);
    const LambdaSolution sol =
        config.is_degenerate() ? lambda_star_continuous_extension(config) : solve_lambda_star(config);
    out.stream() << dump(solution_json(config, sol)) << '\n';
    out.close();
}

void cmd_lambda(const RateArgs& args, double tol, const std::string& out_path) {
    const OddConfig config = args.config();
    if (!(tol > 0.0 && tol <= 1e-3)) throw InputError("--tol must lie in (0, 1e-3]");
    Output out(out_path);
    const LambdaSolution sol =
        config.is_degenerate() ? lambda_star_continuous_extension(config) : solve_lambda_star(config, tol);
    ordered_json j = solution_json(config, sol);
    j["lambda_hat"] = sol.lambda_hat;
    j["continuous_extension"] = sol.continuous_extension;
    j["odd_index"] = config.odd_index + 1;
    const StationarityResidual res = stationarity_residual(sol.lambda_hat, config);
    j["residual"] = res.value;
    j["residual_scale"] = res.scale;
    out.stream() << dump(j) << '\n';
    out.close();
}

void cmd_curve(const std::vector<std::int64_t>& k_list, std::int64_t steps, const std::string& out_path) {
    if (k_list.empty()) throw InputError("--k-list is empty");
    for (auto k : k_list)
        if (k < 3) throw InputError("every K in --k-list must be at least 3");
    if (steps < 2) throw InputError("--nu-steps must be at least 2");
    constexpr double lo = 0.01, hi = 0.99, band = 1e-3;
    Output out(out_path);
    std::ostream& os = out.stream();
    os << "K,nu,lambda_odd,lambda_hat,d_star_scaled\n";
    for (auto k : k_list) {
        for (std::int64_t s = 0; s < steps; ++s) {
            const double nu = lo + (hi - lo) * static_cast<double>(s) / static_cast<double>(steps - 1);
            const auto config = OddConfig::scalar(static_cast<std::size_t>(k), 0, nu, 1.0 - nu);
            const LambdaSolution sol = std::abs(nu - 0.5) < band ? lambda_star_continuous_extension(config)
                                                                 : solve_lambda_star(config);
            os << k << ',' << format_double(nu) << ',' << format_double(sol.lambda_odd) << ','
               << format_double(sol.lambda_hat) << ',' << format_double(sol.d_star) << '\n';
        }
    }
    out.close();
}

void cmd_simulate(const std::string& spec_path, std::int64_t jobs, const std::string& out_path,
                  const std::string& trace_path) {
    const ExperimentSpec spec = parse_experiment_spec(read_file(spec_path));
    if (jobs < 1) throw InputError("--jobs must be positive");
    Output out(out_path);
    std::optional<Output> traces;
    if (!trace_path.empty()) traces.emplace(trace_path);
    const ExperimentReport report = run_experiment(spec, static_cast<std::size_t>(jobs));
    write_report_csv(out.stream(), report);
    out.close();
    if (traces) {
        for (const TracedTrial& t : report.traces) write_trace_jsonl(traces->stream(), t.outcome);
        traces->close();
    }
}

void cmd_drift(const RateArgs& args, std::int64_t n_slots, std::int64_t seeds, std::optional<std::uint64_t> seed,
               const std::vector<std::int64_t>& checkpoints, std::int64_t jobs, const std::string& out_path) {
    DriftSpec spec;
    spec.truth = args.config();
    if (!spec.truth.is_scalar()) throw InputError("drift needs scalar rates");
    if (spec.truth.is_degenerate()) throw InputError("--r1 must differ from --r2");
    if (!seed) throw InputError("--seed is required");
    if (n_slots < 1) throw InputError("--n-slots must be positive");
    if (seeds < 1) throw InputError("--seeds must be positive");
    if (jobs < 1) throw InputError("--jobs must be positive");
    spec.n_slots = static_cast<std::uint64_t>(n_slots);
    for (std::int64_t s = 0; s < seeds; ++s) spec.seeds.push_back(derive_seed(*seed, {static_cast<std::uint64_t>(s)}));
    for (auto c : checkpoints) {
        if (c < 1 || c > n_slots) throw InputError("checkpoints must lie in [1, n-slots]");
        spec.checkpoints.push_back(static_cast<std::uint64_t>(c));
    }
    for (std::size_t c = 1; c < spec.checkpoints.size(); ++c)
        if (spec.checkpoints[c] <= spec.checkpoints[c - 1]) throw InputError("checkpoints must be increasing");
    Output out(out_path);
    const DriftReport report = drift_experiment(spec, static_cast<std::size_t>(jobs));
    write_drift_csv(out.stream(), report, spec.truth);
    out.close();
}

void cmd_bound(const RateArgs& args, double alpha, const std::string& out_path) {
    const OddConfig config = args.config();
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("--alpha must lie in (0, 1)");
    Output out(out_path);
    ordered_json j;
    j["alpha"] = alpha;
    j["d_star"] = d_star(config);
    const double bound = lower_bound_expected_tau(config, alpha);
    if (std::isinf(bound))
        j["lower_bound"] = nullptr;
    else
        j["lower_bound"] = bound;
    if (config.is_degenerate()) j["warning"] = "r1 equals r2: no finite bound";
    out.stream() << dump(j) << '\n';
    out.close();
}

void cmd_index(const std::string& rates_path, std::int64_t k, double floor, std::int64_t jobs,
               const std::string& out_path) {
    if (k < 3) throw InputError("--k must be at least 3");
    if (!(floor > 0.0) || !std::isfinite(floor)) throw InputError("--floor must be positive");
    if (jobs < 1) throw InputError("--jobs must be positive");
    auto in = open_input(rates_path);
    const FiringRateTable table = as_input([&] { return read_firing_rates_csv(in, floor); });
    for (std::size_t a = 0; a < table.size(); ++a)
        if (table.floored_cells(a) > 0)
            std::cerr << "note: image " << table.image(a) << ": " << table.floored_cells(a)
                      << " rate(s) raised to the floor " << format_double(floor) << '\n';
    Output out(out_path);
    const DissimilarityMatrix matrix = pairwise_dstar(table, static_cast<std::size_t>(k), static_cast<std::size_t>(jobs));
    write_matrix_csv(out.stream(), table.images(), matrix);
    out.close();
}

void cmd_analyze(const std::string& matrix_path, const std::string& delays_path, const std::string& out_path) {
    auto matrix_in = open_input(matrix_path);
    auto delays_in = open_input(delays_path);
    const LoadedMatrix loaded = as_input([&] { return read_matrix_csv(matrix_in); });
    const std::vector<SearchTrial> trials = as_input([&] { return read_search_trials_csv(delays_in); });
    const SearchAnalysis analysis = as_input([&] { return analyze_search(loaded.images, loaded.matrix, trials); });
    Output out(out_path);
    out.stream() << analysis_json(analysis).dump() << '\n';
    out.close();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Oddball Poisson process detection: solver, simulation and dissimilarity tools"};
    app.require_subcommand(1);

    std::string out_path;
    RateArgs rates;

    auto* dstar = app.add_subcommand("dstar", "optimal sampling and D* as JSON");
    rates.add_to(dstar, true);
    dstar->add_option("--out", out_path, "output path (default stdout)");

    auto* lambda = app.add_subcommand("lambda", "lambda* with solver diagnostics as JSON");
    double tol = kDefaultSolverTol;
    rates.add_to(lambda, true);
    lambda->add_option("--tol", tol, "bisection tolerance on lambda_hat");
    lambda->add_option("--out", out_path, "output path (default stdout)");

    auto* curve = app.add_subcommand("curve", "lambda*(odd) against nu for several K, as CSV");
    std::vector<std::int64_t> k_list;
    std::int64_t nu_steps = 99;
    curve->add_option("--k-list", k_list, "comma separated K values")->required()->delimiter(',');
    curve->add_option("--nu-steps", nu_steps, "grid points over nu in [0.01, 0.99]");
    curve->add_option("--out", out_path, "output path (default stdout)");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo run of the stopping policy, report CSV");
    std::string spec_path, trace_path;
    std::int64_t jobs = 1;
    simulate->add_option("--spec", spec_path, "experiment spec JSON")->required();
    simulate->add_option("--jobs", jobs, "worker threads");
    simulate->add_option("--out", out_path, "report CSV path (default stdout)");
    simulate->add_option("--trace-out", trace_path, "JSONL trace path for sampled trials");

    auto* drift = app.add_subcommand("drift", "non-stopping runs, per-checkpoint CSV");
    std::int64_t n_slots = 200000, seeds = 50;
    std::optional<std::uint64_t> seed;
    std::vector<std::int64_t> checkpoints;
    rates.add_to(drift, true);
    drift->add_option("--n-slots", n_slots, "slots per run");
    drift->add_option("--seeds", seeds, "number of runs");
    drift->add_option("--seed", seed, "base seed");
    drift->add_option("--checkpoints", checkpoints, "comma separated slot counts")->delimiter(',');
    drift->add_option("--jobs", jobs, "worker threads");
    drift->add_option("--out", out_path, "output path (default stdout)");

    auto* bound = app.add_subcommand("bound", "lower bound on expected stopping time as JSON");
    double alpha = 1e-3;
    rates.add_to(bound, true);
    bound->add_option("--alpha", alpha, "false-detection tolerance")->required();
    bound->add_option("--out", out_path, "output path (default stdout)");

    auto* index = app.add_subcommand("index", "pairwise dissimilarity matrix from firing rates");
    std::string rates_path;
    std::int64_t display_k = 0;
    double floor = kDefaultRateFloor;
    index->add_option("--rates", rates_path, "firing-rate CSV")->required();
    index->add_option("--k", display_k, "search display size (>= 3)")->required();
    index->add_option("--floor", floor, "rate floor in events per slot");
    index->add_option("--jobs", jobs, "worker threads");
    index->add_option("--out", out_path, "matrix CSV path (default stdout)");

    auto* analyze = app.add_subcommand("analyze", "compare decision delays with a dissimilarity matrix");
    std::string matrix_path, delays_path;
    analyze->add_option("--matrix", matrix_path, "matrix CSV")->required();
    analyze->add_option("--delays", delays_path, "delay CSV")->required();
    analyze->add_option("--out", out_path, "analysis JSON path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*dstar) cmd_dstar(rates, out_path);
        else if (*lambda) cmd_lambda(rates, tol, out_path);
        else if (*curve) cmd_curve(k_list, nu_steps, out_path);
        else if (*simulate) cmd_simulate(spec_path, jobs, out_path, trace_path);
        else if (*drift) cmd_drift(rates, n_slots, seeds, seed, checkpoints, jobs, out_path);
        else if (*bound) cmd_bound(rates, alpha, out_path);
        else if (*index) cmd_index(rates_path, display_k, floor, jobs, out_path);
        else if (*analyze) cmd_analyze(matrix_path, delays_path, out_path);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}
