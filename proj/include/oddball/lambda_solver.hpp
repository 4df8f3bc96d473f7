#ifndef ODDBALL_LAMBDA_SOLVER_HPP
#define ODDBALL_LAMBDA_SOLVER_HPP

// Optimal sampling distribution lambda* and the information constant D* for
// the oddball problem, via the one-dimensional reduction:
//
//   D* = max_{0<=l<=1} [ l D(R1||Rt) + (1-l) r D(R2||Rt) ],  r = (K-2)/(K-1)
//   Rt = (l R1 + (1-l) r R2) / (l + (1-l) r)
//
// Vector rates share a single l; Rt is formed per coordinate and the KL terms
// are summed over coordinates.
//
// Indices in this API are 0-based.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "oddball/core_math.hpp"

namespace oddball {

/// Thrown when a computation needs r1 != r2 but the rates coincide.
class DegenerateConfigError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Ground truth (or hypothesis) for K processes: one odd process with rate
/// vector r1, the remaining K-1 sharing rate vector r2.
struct OddConfig {
    std::size_t k = 3;
    std::size_t odd_index = 0;
    std::vector<double> r1;
    std::vector<double> r2;

    /// Validates K >= 3, odd_index < K, equal nonzero dimensions and
    /// finite positive rates. Equal rate vectors are accepted here; callers
    /// that need r1 != r2 check is_degenerate().
    static OddConfig make(std::size_t k, std::size_t odd_index, std::vector<double> r1, std::vector<double> r2) {
        if (k < 3) throw std::invalid_argument("OddConfig: K must be at least 3");
        if (odd_index >= k) throw std::out_of_range("OddConfig: odd index out of range");
        if (r1.empty() || r1.size() != r2.size())
            throw std::invalid_argument("OddConfig: rate vectors must be nonempty and of equal length");
        for (double v : r1)
            if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("OddConfig: rates must be positive and finite");
        for (double v : r2)
            if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("OddConfig: rates must be positive and finite");
        return OddConfig{k, odd_index, std::move(r1), std::move(r2)};
    }

    static OddConfig scalar(std::size_t k, std::size_t odd_index, double r1, double r2) {
        return make(k, odd_index, {r1}, {r2});
    }

    [[nodiscard]] std::size_t dimension() const { return r1.size(); }
    [[nodiscard]] bool is_scalar() const { return r1.size() == 1; }
    [[nodiscard]] bool is_degenerate() const { return r1 == r2; }

    /// nu = theta1 / (theta1 + theta2); scalar configs only.
    [[nodiscard]] std::optional<double> nu() const {
        if (!is_scalar()) return std::nullopt;
        return r1[0] / (r1[0] + r2[0]);
    }
};

struct LambdaSolution {
    std::vector<double> lambda;     // length K, uniform off the odd index
    double lambda_odd = 0.0;
    double lambda_hat = 0.0;        // lambda_odd / (lambda_odd + (1-lambda_odd) r)
    std::optional<double> nu;       // scalar configs only
    std::vector<double> r_tilde;    // mixed rate, per coordinate
    double d_star = 0.0;
    bool continuous_extension = false;
};

/// (K-2)/(K-1): share of the off-odd mass that lands on non-odd processes
/// other than the alternative's odd index.
inline double off_odd_weight(std::size_t k) {
    if (k < 3) throw std::invalid_argument("K must be at least 3");
    return static_cast<double>(k - 2) / static_cast<double>(k - 1);
}

inline double lambda_hat_from_odd(double lambda_odd, std::size_t k) {
    const double r = off_odd_weight(k);
    return lambda_odd / (lambda_odd + (1.0 - lambda_odd) * r);
}

inline double lambda_odd_from_hat(double lambda_hat, std::size_t k) {
    const double r = off_odd_weight(k);
    return lambda_hat * r / (1.0 - lambda_hat + lambda_hat * r);
}

/// Mixed rate Rt for odd-index mass lambda_odd.
inline double mixed_rate(double lambda_odd, double r1, double r2, std::size_t k) {
    if (!(lambda_odd >= 0.0 && lambda_odd <= 1.0)) throw std::domain_error("mixed_rate: lambda_odd must lie in [0,1]");
    const double r = off_odd_weight(k);
    const double w = (1.0 - lambda_odd) * r;
    return (lambda_odd * r1 + w * r2) / (lambda_odd + w);
}

namespace detail {

/// Per-coordinate mixed rate for reparametrized mass lambda_hat.
inline double mixed_rate_hat(double lambda_hat, double r1, double r2) {
    return lambda_hat * r1 + (1.0 - lambda_hat) * r2;
}

inline std::vector<double> mixed_rates(double lambda_hat, const OddConfig& config) {
    std::vector<double> out(config.dimension());
    for (std::size_t d = 0; d < out.size(); ++d) out[d] = mixed_rate_hat(lambda_hat, config.r1[d], config.r2[d]);
    return out;
}

/// Largest per-coordinate |r1 - r2| / (r1 + r2), i.e. 2 |nu - 1/2| for scalars.
inline double max_relative_gap(const OddConfig& config) {
    double gap = 0.0;
    for (std::size_t d = 0; d < config.dimension(); ++d)
        gap = std::max(gap, std::abs(config.r1[d] - config.r2[d]) / (config.r1[d] + config.r2[d]));
    return gap;
}

inline std::vector<double> assemble_lambda(std::size_t k, std::size_t odd_index, double lambda_odd) {
    std::vector<double> lambda(k, (1.0 - lambda_odd) / static_cast<double>(k - 1));
    lambda[odd_index] = lambda_odd;
    return lambda;
}

// Below this gap the two KL terms vanish quadratically and the residual's
// sign is unreliable.
inline constexpr double kNearDegenerateGap = 2e-9;

}  // namespace detail

/// f(lambda_odd) = l D(R1||Rt) + (1-l) r D(R2||Rt), coordinate-summed.
inline double objective(double lambda_odd, const OddConfig& config) {
    if (!(lambda_odd >= 0.0 && lambda_odd <= 1.0)) throw std::domain_error("objective: lambda_odd must lie in [0,1]");
    if (lambda_odd == 0.0 || lambda_odd == 1.0) return 0.0;
    const double r = off_odd_weight(config.k);
    const double lambda_hat = lambda_hat_from_odd(lambda_odd, config.k);
    double value = 0.0;
    for (std::size_t d = 0; d < config.dimension(); ++d) {
        const double rt = detail::mixed_rate_hat(lambda_hat, config.r1[d], config.r2[d]);
        value += lambda_odd * poisson_kl(config.r1[d], rt) + (1.0 - lambda_odd) * r * poisson_kl(config.r2[d], rt);
    }
    return value;
}

struct StationarityResidual {
    double value = 0.0;  // D(R1||Rt) - r D(R2||Rt)
    double scale = 0.0;  // max of the two terms
};

/// Derivative of the objective with respect to lambda_odd, expressed at the
/// reparametrized mass lambda_hat. Strictly decreasing in lambda_hat for
/// non-degenerate configs; zero at the optimum.
inline StationarityResidual stationarity_residual(double lambda_hat, const OddConfig& config) {
    const double r = off_odd_weight(config.k);
    double odd_term = 0.0;
    double other_term = 0.0;
    for (std::size_t d = 0; d < config.dimension(); ++d) {
        const double rt = detail::mixed_rate_hat(lambda_hat, config.r1[d], config.r2[d]);
        odd_term += poisson_kl(config.r1[d], rt);
        other_term += r * poisson_kl(config.r2[d], rt);
    }
    return {odd_term - other_term, std::max(odd_term, other_term)};
}

/// Limit of lambda* as r1 -> r2. Expanding both KL terms to second order,
/// D(x||y) ~ (x-y)^2 / (2y), the stationarity condition becomes
/// (1 - lh)^2 = r lh^2, so lh = 1 / (1 + sqrt(r)) independently of the rates.
inline LambdaSolution lambda_star_continuous_extension(const OddConfig& config) {
    const double r = off_odd_weight(config.k);
    LambdaSolution sol;
    sol.lambda_hat = 1.0 / (1.0 + std::sqrt(r));
    sol.lambda_odd = lambda_odd_from_hat(sol.lambda_hat, config.k);
    sol.lambda = detail::assemble_lambda(config.k, config.odd_index, sol.lambda_odd);
    sol.nu = config.nu();
    sol.r_tilde = detail::mixed_rates(sol.lambda_hat, config);
    sol.d_star = config.is_degenerate() ? 0.0 : objective(sol.lambda_odd, config);
    sol.continuous_extension = true;
    return sol;
}

inline constexpr double kDefaultSolverTol = 1e-10;

/// Maximizer of the reduced objective, found by bisection on the
/// stationarity residual in lambda_hat space.
///
/// Throws DegenerateConfigError when r1 == r2 exactly. Configs within
/// |nu - 1/2| < 1e-9 (per coordinate) return the continuous extension.
inline LambdaSolution solve_lambda_star(const OddConfig& config, double tol = kDefaultSolverTol) {
    if (!(tol > 0.0 && tol <= 1e-3)) throw std::invalid_argument("solve_lambda_star: tol must lie in (0, 1e-3]");
    if (config.is_degenerate())
        throw DegenerateConfigError("solve_lambda_star: r1 == r2; use lambda_star_continuous_extension");
    if (detail::max_relative_gap(config) < detail::kNearDegenerateGap) return lambda_star_continuous_extension(config);

    double lo = 0.0;
    double hi = 1.0;
    for (int iter = 0; iter < 200 && hi - lo > tol; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double g = stationarity_residual(mid, config).value;
        if (g > 0.0)
            lo = mid;
        else if (g < 0.0)
            hi = mid;
        else {
            lo = hi = mid;
        }
    }

    LambdaSolution sol;
    sol.lambda_hat = 0.5 * (lo + hi);
    sol.lambda_odd = lambda_odd_from_hat(sol.lambda_hat, config.k);
    sol.lambda = detail::assemble_lambda(config.k, config.odd_index, sol.lambda_odd);
    sol.nu = config.nu();
    sol.r_tilde = detail::mixed_rates(sol.lambda_hat, config);
    sol.d_star = objective(sol.lambda_odd, config);
    return sol;
}

/// D*(i, R1, R2); zero for degenerate configs.
inline double d_star(const OddConfig& config) {
    if (config.is_degenerate()) return 0.0;
    return solve_lambda_star(config).d_star;
}

/// Grid max-min over the full probability simplex, with the two inner
/// minimizations done analytically (R1' = R2 zeroes the middle term; R2'
/// from the first-order condition). Test oracle only: scalar rates, K <= 4.
inline double brute_force_d_star(const OddConfig& config, int grid_resolution) {
    if (!config.is_scalar()) throw std::invalid_argument("brute_force_d_star: scalar rates only");
    if (config.k > 4) throw std::invalid_argument("brute_force_d_star: K must be at most 4");
    if (grid_resolution < 100) throw std::invalid_argument("brute_force_d_star: resolution must be >= 100");
    if (config.is_degenerate()) return 0.0;

    const std::size_t k = config.k;
    const std::size_t odd = config.odd_index;
    const double r1 = config.r1[0];
    const double r2 = config.r2[0];
    const double res = static_cast<double>(grid_resolution);

    double best = 0.0;
    std::vector<int> counts(k, 0);
    auto evaluate = [&] {
        const double li = counts[odd] / res;
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
            if (j == odd) continue;
            const double w = (grid_resolution - counts[odd] - counts[j]) / res;
            double v = 0.0;
            if (li + w > 0.0) {
                const double r2p = (li * r1 + w * r2) / (li + w);
                v = li * poisson_kl(r1, r2p) + w * poisson_kl(r2, r2p);
            }
            worst = std::min(worst, v);
        }
        best = std::max(best, worst);
    };
    std::function<void(std::size_t, int)> recurse = [&](std::size_t pos, int remaining) {
        if (pos + 1 == k) {
            counts[pos] = remaining;
            evaluate();
            return;
        }
        for (int c = 0; c <= remaining; ++c) {
            counts[pos] = c;
            recurse(pos + 1, remaining - c);
        }
    };
    recurse(0, grid_resolution);
    return best;
}

/// d_b(alpha, 1-alpha) / D*: lower bound on E[tau] for any policy whose
/// false-detection probability is at most alpha. +inf for degenerate configs.
inline double lower_bound_expected_tau(const OddConfig& config, double alpha_max) {
    if (!(alpha_max > 0.0 && alpha_max < 1.0))
        throw std::domain_error("lower_bound_expected_tau: alpha must lie in (0,1)");
    const double db = binary_relative_entropy(alpha_max);
    if (config.is_degenerate()) return db == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return db / d_star(config);
}

/// Memo of lambda*(odd) keyed on nu quantized to 1e-6 for a fixed K. The
/// odd mass depends on the rates only through nu, so the entry for a bucket
/// is solved at the bucket's representative nu and is a pure function of it.
class LambdaCache {
public:
    explicit LambdaCache(std::size_t k) : k_(k) { (void)off_odd_weight(k); }

    [[nodiscard]] std::size_t k() const { return k_; }

    /// Odd-index mass for estimated odd/non-odd rates (theta1, theta2);
    /// requires theta1 + theta2 > 0.
    double odd_mass(double theta1, double theta2) {
        const double nu = theta1 / (theta1 + theta2);
        const auto key = static_cast<std::int64_t>(std::llround(nu * kBuckets));
        if (auto it = table_.find(key); it != table_.end()) return it->second;
        const double nu_q = std::clamp(static_cast<double>(key) / kBuckets, 1.0 / kBuckets, 1.0 - 1.0 / kBuckets);
        const auto config = OddConfig::scalar(k_, 0, nu_q, 1.0 - nu_q);
        const double mass = config.is_degenerate() ? lambda_star_continuous_extension(config).lambda_odd
                                                   : solve_lambda_star(config).lambda_odd;
        table_.emplace(key, mass);
        return mass;
    }

    [[nodiscard]] std::size_t size() const { return table_.size(); }

private:
    static constexpr double kBuckets = 1e6;
    std::size_t k_;
    std::unordered_map<std::int64_t, double> table_;
};

}  // namespace oddball

#endif  // ODDBALL_LAMBDA_SOLVER_HPP
