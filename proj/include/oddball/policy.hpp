#ifndef ODDBALL_POLICY_HPP
#define ODDBALL_POLICY_HPP

// The modified-GLRT sequential policy. At the end of slot n the leader
// i* = argmax_i Z_i(n) is found; the test stops and declares i* once
// Z_{i*}(n) >= log((K-1) L), otherwise the next process is drawn from
// lambda*(i*, theta_hat_{i*,1}, theta_hat_{i*,2}).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "oddball/glr.hpp"
#include "oddball/lambda_solver.hpp"
#include "oddball/random.hpp"

namespace oddball {

enum class Variant {
    standard,      // stop on any leader above threshold
    non_stopping,  // never stop
    stop_only_on,  // stop only when the designated index leads above threshold
};

inline constexpr std::uint64_t kDefaultMaxSlots = 10'000'000;

struct PolicyConfig {
    std::size_t k = 3;
    double threshold_l = 1.0;
    Variant variant = Variant::standard;
    std::size_t stop_index = 0;    // used by Variant::stop_only_on
    std::uint64_t warmup_slots = 3;
    std::uint64_t max_slots = kDefaultMaxSlots;
    bool trace = false;

    /// Validated config; warm-up defaults to one round-robin pass over K.
    static PolicyConfig make(std::size_t k, double threshold_l, Variant variant = Variant::standard,
                             std::size_t stop_index = 0, std::optional<std::uint64_t> warmup_slots = std::nullopt,
                             std::uint64_t max_slots = kDefaultMaxSlots, bool trace = false) {
        if (k < 3) throw std::invalid_argument("PolicyConfig: K must be at least 3");
        if (!(threshold_l >= 1.0) || !std::isfinite(threshold_l))
            throw std::invalid_argument("PolicyConfig: L must be finite and >= 1");
        if (variant == Variant::stop_only_on && stop_index >= k)
            throw std::out_of_range("PolicyConfig: stop index out of range");
        PolicyConfig cfg{k, threshold_l, variant, stop_index, warmup_slots.value_or(k), max_slots, trace};
        if (cfg.max_slots == 0) throw std::invalid_argument("PolicyConfig: max_slots must be positive");
        if (cfg.max_slots < cfg.warmup_slots) throw std::invalid_argument("PolicyConfig: max_slots < warmup_slots");
        return cfg;
    }

    /// log((K-1) L).
    [[nodiscard]] double threshold() const { return std::log(static_cast<double>(k - 1) * threshold_l); }

    [[nodiscard]] bool may_stop_on(std::size_t leader) const {
        switch (variant) {
            case Variant::standard: return true;
            case Variant::non_stopping: return false;
            case Variant::stop_only_on: return leader == stop_index;
        }
        return false;
    }
};

struct PolicyDecision {
    enum class Kind { continue_sampling, stop };

    Kind kind = Kind::continue_sampling;
    std::vector<double> distribution;  // empty when stopping
    std::size_t action = 0;            // sampled process when continuing
    std::size_t declared = 0;          // declared odd index when stopping

    [[nodiscard]] bool stops() const { return kind == Kind::stop; }
};

/// Per-slot decision rule. Owns the lambda* memo for its K.
class ModifiedGlrPolicy {
public:
    explicit ModifiedGlrPolicy(PolicyConfig config) : config_(std::move(config)), cache_(config_.k) {}

    [[nodiscard]] const PolicyConfig& config() const { return config_; }

    /// Decision after `n` completed slots. Consumes exactly one uniform draw
    /// when continuing and none when stopping.
    PolicyDecision next(const GlrState& glr, std::uint64_t n, Stream& stream) {
        PolicyDecision decision;
        if (config_.may_stop_on(glr.leader) && glr.leader_z() >= config_.threshold()) {
            decision.kind = PolicyDecision::Kind::stop;
            decision.declared = glr.leader;
            return decision;
        }
        decision.distribution = sampling_distribution(glr, n);
        decision.action = draw(decision.distribution, stream);
        return decision;
    }

    /// Warm-up: round-robin one-hot. Invalid or degenerate leader estimates:
    /// uniform. Otherwise lambda* at the leader's estimates.
    std::vector<double> sampling_distribution(const GlrState& glr, std::uint64_t n) {
        const std::size_t k = config_.k;
        if (n < config_.warmup_slots) {
            std::vector<double> one_hot(k, 0.0);
            one_hot[static_cast<std::size_t>(n % k)] = 1.0;
            return one_hot;
        }
        const RateEstimate& est = glr.theta_hat[glr.leader];
        if (!est.valid() || std::abs(est.odd - est.non_odd) <= kDegenerateEstimateGap)
            return std::vector<double>(k, 1.0 / static_cast<double>(k));
        const double mass = cache_.odd_mass(est.odd, est.non_odd);
        return detail::assemble_lambda(k, glr.leader, mass);
    }

    static constexpr double kDegenerateEstimateGap = 1e-9;

private:
    static std::size_t draw(const std::vector<double>& distribution, Stream& stream) {
        const double u = stream.uniform();
        double cdf = 0.0;
        std::size_t last_positive = 0;
        for (std::size_t j = 0; j < distribution.size(); ++j) {
            if (distribution[j] <= 0.0) continue;
            cdf += distribution[j];
            last_positive = j;
            if (u < cdf) return j;
        }
        return last_positive;
    }

    PolicyConfig config_;
    LambdaCache cache_;
};

/// One traced slot: action taken at slot n, its count, and the leader after
/// the update. Indices are 0-based.
struct SlotRecord {
    std::uint64_t n = 0;
    std::size_t action = 0;
    std::uint64_t count = 0;
    std::size_t leader = 0;
    double z_leader = 0.0;
};

struct TrialOutcome {
    std::uint64_t tau = 0;
    std::size_t delta = 0;
    bool correct = false;
    bool capped = false;
    bool traced = false;
    double z_leader = 0.0;          // leader statistic at the final slot
    std::vector<SlotRecord> trace;  // empty unless traced
    SufficientStats final_stats{1};
};

/// Step-wise simulation of one trial against a ground truth. The trial owns
/// its stream; each slot consumes draws in a fixed order (Poisson count,
/// tie-break, action), so trials with the same seed follow the same path
/// until one of them stops.
class Trial {
public:
    Trial(PolicyConfig config, OddConfig truth, Stream stream)
        : policy_(std::move(config)), truth_(std::move(truth)), stream_(std::move(stream)), stats_(truth_.k) {
        if (!truth_.is_scalar()) throw std::invalid_argument("Trial: simulation needs scalar rates");
        if (truth_.k != policy_.config().k) throw std::invalid_argument("Trial: policy and truth disagree on K");
        next_action_ = policy_.config().warmup_slots > 0
                           ? 0
                           : stream_.index(truth_.k);
    }

    [[nodiscard]] bool finished() const { return finished_; }
    [[nodiscard]] const SufficientStats& stats() const { return stats_; }
    [[nodiscard]] const GlrState& glr() const { return glr_; }
    [[nodiscard]] const PolicyConfig& config() const { return policy_.config(); }
    [[nodiscard]] const OddConfig& truth() const { return truth_; }

    /// Simulate one slot.
    SlotRecord step() {
        if (finished_) throw std::logic_error("Trial::step: trial already finished");
        const std::size_t action = next_action_;
        const double rate = action == truth_.odd_index ? truth_.r1[0] : truth_.r2[0];
        const std::uint64_t count = sample_poisson(rate, stream_);
        stats_.update(action, count);
        const std::uint64_t n = stats_.slots();

        glr_ = modified_glr(stats_, stream_);
        const PolicyDecision decision = policy_.next(glr_, n, stream_);

        SlotRecord record{n, action, count, glr_.leader, glr_.leader_z()};
        if (policy_.config().trace) trace_.push_back(record);

        if (decision.stops()) {
            finish(decision.declared, false);
        } else if (n >= policy_.config().max_slots) {
            finish(glr_.leader, true);
        } else {
            next_action_ = decision.action;
        }
        return record;
    }

    /// Run to completion and release the outcome.
    TrialOutcome run() && {
        while (!finished_) step();
        TrialOutcome out;
        out.tau = stats_.slots();
        out.delta = delta_;
        out.correct = delta_ == truth_.odd_index;
        out.capped = capped_;
        out.traced = policy_.config().trace;
        out.z_leader = glr_.leader_z();
        out.trace = std::move(trace_);
        out.final_stats = stats_;
        return out;
    }

private:
    void finish(std::size_t delta, bool capped) {
        finished_ = true;
        delta_ = delta;
        capped_ = capped;
    }

    ModifiedGlrPolicy policy_;
    OddConfig truth_;
    Stream stream_;
    SufficientStats stats_;
    GlrState glr_;
    std::vector<SlotRecord> trace_;
    std::size_t next_action_ = 0;
    std::size_t delta_ = 0;
    bool finished_ = false;
    bool capped_ = false;
};

inline TrialOutcome run_trial(const PolicyConfig& config, const OddConfig& truth, Stream stream) {
    return Trial(config, truth, std::move(stream)).run();
}

/// N_j / tau from a traced outcome.
inline std::vector<double> empirical_action_frequencies(const TrialOutcome& outcome) {
    if (!outcome.traced) throw std::logic_error("empirical_action_frequencies: outcome has no trace");
    std::vector<double> freq(outcome.final_stats.k(), 0.0);
    for (const SlotRecord& r : outcome.trace) freq.at(r.action) += 1.0;
    const double tau = static_cast<double>(outcome.trace.size());
    if (tau > 0.0)
        for (double& f : freq) f /= tau;
    return freq;
}

}  // namespace oddball

#endif  // ODDBALL_POLICY_HPP
