#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "oddball/policy.hpp"

using namespace oddball;

namespace {

GlrState fake_glr(std::size_t k, std::size_t leader, double leader_z, RateEstimate est) {
    GlrState g;
    g.k = k;
    g.z.assign(k * k, -1.0);
    g.z_min.assign(k, -1.0);
    g.z_min[leader] = leader_z;
    g.theta_hat.assign(k, est);
    g.leader = leader;
    return g;
}

RateEstimate estimate(double odd, double non_odd) { return {odd, non_odd, true, true}; }

const OddConfig kTruth = OddConfig::scalar(5, 2, 10.0, 1.0);

}  // namespace

TEST(PolicyConfig, ValidationAndThreshold) {
    const auto cfg = PolicyConfig::make(5, 1000.0);
    EXPECT_DOUBLE_EQ(cfg.threshold(), std::log(4000.0));
    EXPECT_EQ(cfg.warmup_slots, 5u);
    EXPECT_GT(PolicyConfig::make(3, 1.0).threshold(), 0.0);
    EXPECT_DOUBLE_EQ(PolicyConfig::make(3, 1.0).threshold(), std::log(2.0));
    EXPECT_THROW(PolicyConfig::make(2, 10.0), std::invalid_argument);
    EXPECT_THROW(PolicyConfig::make(3, 0.5), std::invalid_argument);
    EXPECT_THROW(PolicyConfig::make(3, 10.0, Variant::stop_only_on, 3), std::out_of_range);
    EXPECT_THROW(PolicyConfig::make(3, 10.0, Variant::standard, 0, 10, 5), std::invalid_argument);
}

TEST(ModifiedGlrPolicy, StopsAtExactThreshold) {
    ModifiedGlrPolicy policy(PolicyConfig::make(4, 100.0));
    const double t = policy.config().threshold();
    Stream a(1), b(1);
    const auto stop = policy.next(fake_glr(4, 1, t, estimate(5, 1)), 10, a);
    EXPECT_TRUE(stop.stops());
    EXPECT_EQ(stop.declared, 1u);
    EXPECT_TRUE(stop.distribution.empty());
    EXPECT_EQ(a(), b());  // stopping consumes nothing

    const auto go = policy.next(fake_glr(4, 1, std::nextafter(t, 0.0), estimate(5, 1)), 10, a);
    EXPECT_FALSE(go.stops());
    (void)b.uniform();
    EXPECT_EQ(a(), b());  // continuing consumes exactly one uniform
}

TEST(ModifiedGlrPolicy, Variants) {
    ModifiedGlrPolicy never(PolicyConfig::make(4, 10.0, Variant::non_stopping));
    ModifiedGlrPolicy only2(PolicyConfig::make(4, 10.0, Variant::stop_only_on, 2));
    Stream s(2);
    EXPECT_FALSE(never.next(fake_glr(4, 1, 1e9, estimate(5, 1)), 10, s).stops());
    EXPECT_FALSE(only2.next(fake_glr(4, 1, 1e9, estimate(5, 1)), 10, s).stops());
    EXPECT_TRUE(only2.next(fake_glr(4, 2, 1e9, estimate(5, 1)), 10, s).stops());
}

TEST(ModifiedGlrPolicy, SamplingDistribution) {
    ModifiedGlrPolicy policy(PolicyConfig::make(5, 10.0));
    for (std::uint64_t n = 0; n < 5; ++n) {
        const auto d = policy.sampling_distribution(fake_glr(5, 0, 0.0, estimate(5, 1)), n);
        for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(d[j], j == n ? 1.0 : 0.0);
    }
    const auto uniform_invalid = policy.sampling_distribution(fake_glr(5, 0, 0.0, RateEstimate{}), 7);
    for (double p : uniform_invalid) EXPECT_DOUBLE_EQ(p, 0.2);
    const auto uniform_equal = policy.sampling_distribution(fake_glr(5, 0, 0.0, estimate(2.0, 2.0)), 7);
    for (double p : uniform_equal) EXPECT_DOUBLE_EQ(p, 0.2);

    const auto d = policy.sampling_distribution(fake_glr(5, 3, 0.0, estimate(10.0, 1.0)), 7);
    const auto sol = solve_lambda_star(OddConfig::scalar(5, 3, 10.0, 1.0));
    EXPECT_NEAR(std::accumulate(d.begin(), d.end(), 0.0), 1.0, 1e-12);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(d[j], sol.lambda[j], 1e-6);
}

TEST(ModifiedGlrPolicy, ActionFrequenciesFollowDistribution) {
    ModifiedGlrPolicy policy(PolicyConfig::make(4, 10.0));
    const GlrState g = fake_glr(4, 1, 0.0, estimate(1.0, 3.0));
    const auto dist = policy.sampling_distribution(g, 50);
    Stream s(6);
    std::vector<int> hits(4, 0);
    const int n = 100000;
    for (int t = 0; t < n; ++t) ++hits[policy.next(g, 50, s).action];
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(hits[j], n * dist[j], 4.0 * std::sqrt(n * dist[j] * (1 - dist[j])));
}

TEST(Trial, DeterministicForEqualSeeds) {
    const auto cfg = PolicyConfig::make(5, 1000.0, Variant::standard, 0, std::nullopt, kDefaultMaxSlots, true);
    const TrialOutcome a = run_trial(cfg, kTruth, Stream(77));
    const TrialOutcome b = run_trial(cfg, kTruth, Stream(77));
    EXPECT_EQ(a.tau, b.tau);
    EXPECT_EQ(a.delta, b.delta);
    EXPECT_EQ(a.z_leader, b.z_leader);
    EXPECT_EQ(a.final_stats, b.final_stats);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t t = 0; t < a.trace.size(); ++t) {
        EXPECT_EQ(a.trace[t].action, b.trace[t].action);
        EXPECT_EQ(a.trace[t].count, b.trace[t].count);
        EXPECT_EQ(a.trace[t].z_leader, b.trace[t].z_leader);
    }
}

TEST(Trial, WarmupIsRoundRobinAndTraceIsConsistent) {
    const auto cfg = PolicyConfig::make(5, 1e6, Variant::standard, 0, std::nullopt, kDefaultMaxSlots, true);
    const TrialOutcome o = run_trial(cfg, kTruth, Stream(5));
    ASSERT_GE(o.trace.size(), 5u);
    for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(o.trace[t].action, t);
    EXPECT_EQ(o.trace.size(), o.tau);
    std::uint64_t events = 0;
    for (std::size_t t = 0; t < o.trace.size(); ++t) {
        EXPECT_EQ(o.trace[t].n, t + 1);
        events += o.trace[t].count;
    }
    EXPECT_EQ(events, o.final_stats.total_events());
    EXPECT_FALSE(o.capped);
    EXPECT_GE(o.trace.back().z_leader, cfg.threshold());
    EXPECT_EQ(o.trace.back().leader, o.delta);
    for (std::size_t t = 0; t + 1 < o.trace.size(); ++t)
        EXPECT_LT(o.trace[t].z_leader, cfg.threshold());
}

TEST(Trial, StoppingTimeNonDecreasingInThreshold) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        std::uint64_t prev = 0;
        for (double l : {2.0, 10.0, 100.0, 1e3, 1e4, 1e6}) {
            const auto o = run_trial(PolicyConfig::make(5, l), kTruth, Stream(derive_seed(seed, {})));
            EXPECT_GE(o.tau, prev) << seed << " " << l;
            prev = o.tau;
        }
    }
}

TEST(Trial, VariantCoupling) {
    const auto truth = OddConfig::scalar(4, 1, 1.0, 3.0);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto standard = run_trial(PolicyConfig::make(4, 100.0), truth, Stream(seed));
        for (std::size_t i = 0; i < 4; ++i) {
            const auto forced = run_trial(PolicyConfig::make(4, 100.0, Variant::stop_only_on, i, std::nullopt, 2000),
                                          truth, Stream(seed));
            EXPECT_GE(forced.tau, standard.tau);
            if (!forced.capped) { EXPECT_EQ(forced.delta, i); }
            if (standard.delta == i) { EXPECT_EQ(forced.tau, standard.tau); }
        }
    }
}

TEST(Trial, CapAndNonStopping) {
    const auto cfg = PolicyConfig::make(3, 10.0, Variant::non_stopping, 0, std::nullopt, 500, true);
    const auto o = run_trial(cfg, OddConfig::scalar(3, 0, 1.0, 2.0), Stream(4));
    EXPECT_TRUE(o.capped);
    EXPECT_EQ(o.tau, 500u);
    const auto freq = empirical_action_frequencies(o);
    EXPECT_NEAR(std::accumulate(freq.begin(), freq.end(), 0.0), 1.0, 1e-12);
    for (std::size_t j = 0; j < 3; ++j)
        EXPECT_DOUBLE_EQ(freq[j], static_cast<double>(o.final_stats.visits(j)) / 500.0);

    const auto untraced = run_trial(PolicyConfig::make(3, 10.0), OddConfig::scalar(3, 0, 1.0, 2.0), Stream(4));
    EXPECT_THROW(empirical_action_frequencies(untraced), std::logic_error);
}

TEST(Trial, RejectsMismatchedTruth) {
    EXPECT_THROW(Trial(PolicyConfig::make(4, 10.0), kTruth, Stream(1)), std::invalid_argument);
    EXPECT_THROW(Trial(PolicyConfig::make(3, 10.0), OddConfig::make(3, 0, {1.0, 2.0}, {2.0, 2.0}), Stream(1)),
                 std::invalid_argument);
}

TEST(Trial, EmpiricalRatesMatchTruthOnLongRun) {
    const auto truth = OddConfig::scalar(3, 0, 1.0, 2.0);
    const auto cfg = PolicyConfig::make(3, 10.0, Variant::non_stopping, 0, std::nullopt, 100000, true);
    const auto o = run_trial(cfg, truth, Stream(31));
    const auto sol = solve_lambda_star(truth);
    const auto freq = empirical_action_frequencies(o);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_NEAR(freq[j], sol.lambda[j], 0.02);
        const double nj = static_cast<double>(o.final_stats.visits(j));
        const double rate = j == 0 ? 1.0 : 2.0;
        EXPECT_NEAR(static_cast<double>(o.final_stats.events(j)) / nj, rate, 3.0 * std::sqrt(rate / nj));
    }
}
