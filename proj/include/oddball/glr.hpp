#ifndef ODDBALL_GLR_HPP
#define ODDBALL_GLR_HPP

// Sufficient statistics and the modified GLR statistic
//
//   Z_ij(n) = log f_avg(X^n, A^n | H = i) - log f_ml(X^n, A^n | H = j)
//
// where f_avg averages the likelihood against independent unit-exponential
// priors on the odd and non-odd rates, and f_ml maximizes it. The common
// factor 1/prod(X_t!) is left out of both sides; it cancels in Z_ij.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "oddball/core_math.hpp"
#include "oddball/random.hpp"

namespace oddball {

/// Per-process visit counts N_j and event totals Y_j after n slots.
class SufficientStats {
public:
    explicit SufficientStats(std::size_t k) : visits_(k, 0), events_(k, 0) {
        if (k == 0) throw std::invalid_argument("SufficientStats: K must be positive");
    }

    /// Record one slot in which process `action` showed `count` events.
    void update(std::size_t action, std::uint64_t count) {
        if (action >= visits_.size()) throw std::out_of_range("SufficientStats::update: process index out of range");
        ++visits_[action];
        events_[action] += count;
        ++n_;
        total_ += count;
    }

    [[nodiscard]] std::size_t k() const { return visits_.size(); }
    [[nodiscard]] std::uint64_t slots() const { return n_; }
    [[nodiscard]] std::uint64_t total_events() const { return total_; }
    [[nodiscard]] std::uint64_t visits(std::size_t j) const { return visits_.at(j); }
    [[nodiscard]] std::uint64_t events(std::size_t j) const { return events_.at(j); }
    [[nodiscard]] const std::vector<std::uint64_t>& visits() const { return visits_; }
    [[nodiscard]] const std::vector<std::uint64_t>& events() const { return events_; }

    friend bool operator==(const SufficientStats&, const SufficientStats&) = default;

private:
    std::uint64_t n_ = 0;
    std::uint64_t total_ = 0;
    std::vector<std::uint64_t> visits_;
    std::vector<std::uint64_t> events_;
};

namespace detail {

inline double as_double(std::uint64_t v) { return static_cast<double>(v); }

// log of Gamma(y+1) / (m+1)^{y+1}: the gamma-prior integral of
// theta^y e^{-m theta}.
inline double averaged_term(std::uint64_t y, std::uint64_t m) {
    const double yd = as_double(y) + 1.0;
    return log_gamma(yd) - yd * std::log(as_double(m) + 1.0);
}

// y (log(y/m) - 1), with 0 when y == 0.
inline double ml_term(std::uint64_t y, std::uint64_t m) {
    if (y == 0) return 0.0;
    const double yd = as_double(y);
    return yd * (std::log(yd / as_double(m)) - 1.0);
}

}  // namespace detail

/// Log averaged likelihood under H = i (common factorial factor omitted).
inline LogProb averaged_log_likelihood(const SufficientStats& stats, std::size_t i) {
    if (stats.slots() == 0) throw std::domain_error("averaged_log_likelihood: no observations");
    const std::uint64_t yi = stats.events(i);
    const std::uint64_t ni = stats.visits(i);
    return LogProb(detail::averaged_term(yi, ni) +
                   detail::averaged_term(stats.total_events() - yi, stats.slots() - ni));
}

/// Log maximum likelihood under H = j (common factorial factor omitted).
inline LogProb ml_log_likelihood(const SufficientStats& stats, std::size_t j) {
    if (stats.slots() == 0) throw std::domain_error("ml_log_likelihood: no observations");
    const std::uint64_t yj = stats.events(j);
    const std::uint64_t nj = stats.visits(j);
    return LogProb(detail::ml_term(yj, nj) + detail::ml_term(stats.total_events() - yj, stats.slots() - nj));
}

/// ML estimates of the odd and non-odd rates under one hypothesis. An
/// estimate with a zero denominator is reported as 0 and flagged invalid.
struct RateEstimate {
    double odd = 0.0;
    double non_odd = 0.0;
    bool odd_valid = false;
    bool non_odd_valid = false;

    [[nodiscard]] bool valid() const { return odd_valid && non_odd_valid; }
};

inline RateEstimate rate_estimate(const SufficientStats& stats, std::size_t j) {
    RateEstimate est;
    const std::uint64_t nj = stats.visits(j);
    const std::uint64_t rest = stats.slots() - nj;
    if (nj > 0) {
        est.odd = detail::as_double(stats.events(j)) / detail::as_double(nj);
        est.odd_valid = true;
    }
    if (rest > 0) {
        est.non_odd = detail::as_double(stats.total_events() - stats.events(j)) / detail::as_double(rest);
        est.non_odd_valid = true;
    }
    return est;
}

struct GlrState {
    std::size_t k = 0;
    std::vector<double> z;       // row-major K x K, z[i*K + j] = Z_ij; diagonal is 0 and unused
    std::vector<double> z_min;   // Z_i = min_{j != i} Z_ij
    std::vector<RateEstimate> theta_hat;
    std::size_t leader = 0;      // argmax_i Z_i

    [[nodiscard]] double at(std::size_t i, std::size_t j) const { return z[i * k + j]; }
    [[nodiscard]] double leader_z() const { return z_min[leader]; }
};

namespace detail {

inline GlrState glr_matrix(const SufficientStats& stats) {
    const std::size_t k = stats.k();
    if (k < 2) throw std::invalid_argument("modified_glr: need at least two processes");
    GlrState state;
    state.k = k;
    state.z.assign(k * k, 0.0);
    state.z_min.assign(k, std::numeric_limits<double>::infinity());
    state.theta_hat.resize(k);

    std::vector<double> avg(k), ml(k);
    for (std::size_t i = 0; i < k; ++i) {
        avg[i] = averaged_log_likelihood(stats, i).value;
        ml[i] = ml_log_likelihood(stats, i).value;
        state.theta_hat[i] = rate_estimate(stats, i);
    }
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) continue;
            const double zij = avg[i] - ml[j];
            state.z[i * k + j] = zij;
            if (zij < state.z_min[i]) state.z_min[i] = zij;
        }
    return state;
}

inline std::vector<std::size_t> tied_leaders(const GlrState& state) {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> tied;
    for (std::size_t i = 0; i < state.k; ++i) {
        if (state.z_min[i] > best) {
            best = state.z_min[i];
            tied.assign(1, i);
        } else if (state.z_min[i] == best) {
            tied.push_back(i);
        }
    }
    return tied;
}

}  // namespace detail

/// Full Z matrix, minima and estimates. Ties for the leader are broken
/// uniformly at random with exactly one draw from `stream`, whether or not a
/// tie occurs, so coupled runs consume their streams identically.
inline GlrState modified_glr(const SufficientStats& stats, Stream& stream) {
    GlrState state = detail::glr_matrix(stats);
    const auto tied = detail::tied_leaders(state);
    state.leader = tied[stream.index(tied.size())];
    return state;
}

/// As above with ties going to the lowest index; for callers without a stream.
inline GlrState modified_glr(const SufficientStats& stats) {
    GlrState state = detail::glr_matrix(stats);
    state.leader = detail::tied_leaders(state).front();
    return state;
}

}  // namespace oddball

#endif  // ODDBALL_GLR_HPP
