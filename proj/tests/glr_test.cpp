#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "oddball/glr.hpp"
#include "oracles.hpp"

using namespace oddball;

namespace {

SufficientStats random_stats(std::mt19937_64& gen, std::size_t k, int max_slots, int max_count) {
    SufficientStats s(k);
    std::uniform_int_distribution<int> slots(1, max_slots);
    std::uniform_int_distribution<std::size_t> proc(0, k - 1);
    std::uniform_int_distribution<int> count(0, max_count);
    const int n = slots(gen);
    for (int t = 0; t < n; ++t) s.update(proc(gen), static_cast<std::uint64_t>(count(gen)));
    return s;
}

// Grid supremum of the explicit log-likelihood under H = j.
double grid_sup_log_likelihood(const SufficientStats& s, std::size_t j) {
    const double y1 = static_cast<double>(s.events(j));
    const double m1 = static_cast<double>(s.visits(j));
    const double y2 = static_cast<double>(s.total_events() - s.events(j));
    const double m2 = static_cast<double>(s.slots() - s.visits(j));
    auto best = [](double y, double m) {
        double sup = -INFINITY;
        for (int g = 1; g <= 200000; ++g) {
            const double t = g * 1e-4;
            sup = std::max(sup, (y > 0 ? y * std::log(t) : 0.0) - m * t);
        }
        return y == 0 ? 0.0 : sup;  // with y == 0 the sup is approached as t -> 0
    };
    return best(y1, m1) + best(y2, m2);
}

}  // namespace

TEST(SufficientStats, Updates) {
    SufficientStats s(3);
    s.update(1, 5);
    EXPECT_EQ(s.slots(), 1u);
    EXPECT_EQ(s.visits(1), 1u);
    EXPECT_EQ(s.events(1), 5u);
    EXPECT_EQ(s.total_events(), 5u);
    s.update(1, 2);
    EXPECT_EQ(s.events(1), 7u);
    EXPECT_EQ(s.visits(1), 2u);
    EXPECT_THROW(s.update(3, 1), std::out_of_range);
}

TEST(SufficientStats, OrderInvariantAndConserving) {
    std::mt19937_64 gen(8);
    std::vector<std::pair<std::size_t, std::uint64_t>> ups;
    for (int i = 0; i < 300; ++i) ups.emplace_back(gen() % 5, gen() % 13);
    SufficientStats a(5), b(5);
    for (auto [j, c] : ups) a.update(j, c);
    std::shuffle(ups.begin(), ups.end(), gen);
    for (auto [j, c] : ups) b.update(j, c);
    EXPECT_EQ(a, b);
    std::uint64_t n = 0, y = 0;
    for (std::size_t j = 0; j < 5; ++j) {
        n += a.visits(j);
        y += a.events(j);
        if (a.visits(j) == 0) { EXPECT_EQ(a.events(j), 0u); }
    }
    EXPECT_EQ(n, a.slots());
    EXPECT_EQ(y, a.total_events());
}

TEST(AveragedLikelihood, SingleSlot) {
    SufficientStats s(3);
    s.update(0, 0);
    EXPECT_NEAR(averaged_log_likelihood(s, 0).value, -std::log(2.0), 1e-15);
    EXPECT_THROW(averaged_log_likelihood(SufficientStats(3), 0), std::domain_error);
}

TEST(AveragedLikelihood, MatchesTwoDimensionalQuadrature) {
    std::mt19937_64 gen(101);
    for (int trial = 0; trial < 20; ++trial) {
        const SufficientStats s = random_stats(gen, 3 + trial % 3, 10, 20);
        for (std::size_t i = 0; i < s.k(); ++i) {
            const double y1 = static_cast<double>(s.events(i));
            const double m1 = static_cast<double>(s.visits(i));
            const double y2 = static_cast<double>(s.total_events() - s.events(i));
            const double m2 = static_cast<double>(s.slots() - s.visits(i));
            EXPECT_NEAR(averaged_log_likelihood(s, i).value, oracles::quadrature_log_average(y1, m1, y2, m2), 1e-6);
        }
    }
}

TEST(MlLikelihood, Examples) {
    SufficientStats zeros(3);
    zeros.update(0, 0);
    zeros.update(2, 0);
    EXPECT_EQ(ml_log_likelihood(zeros, 0).value, 0.0);
    EXPECT_EQ(ml_log_likelihood(zeros, 1).value, 0.0);

    SufficientStats s(3);
    s.update(1, 3);
    s.update(0, 0);
    EXPECT_NEAR(ml_log_likelihood(s, 1).value, 3.0 * (std::log(3.0) - 1.0), 1e-15);
}

TEST(MlLikelihood, MatchesGridSupremum) {
    std::mt19937_64 gen(202);
    for (int trial = 0; trial < 10; ++trial) {
        const SufficientStats s = random_stats(gen, 3, 8, 6);
        for (std::size_t j = 0; j < 3; ++j) {
            const double ml = ml_log_likelihood(s, j).value;
            const double grid = grid_sup_log_likelihood(s, j);
            EXPECT_LE(grid, ml + 1e-12);
            EXPECT_NEAR(grid, ml, 1e-5);
        }
    }
}

TEST(Likelihoods, AveragedNeverExceedsMaximum) {
    std::mt19937_64 gen(303);
    for (int trial = 0; trial < 2000; ++trial) {
        const SufficientStats s = random_stats(gen, 3 + trial % 5, 60, 15);
        for (std::size_t i = 0; i < s.k(); ++i) {
            const double avg = averaged_log_likelihood(s, i).value;
            const double ml = ml_log_likelihood(s, i).value;
            EXPECT_LT(avg, ml);
        }
    }
}

TEST(RateEstimate, SentinelsAndValues) {
    SufficientStats s(4);
    s.update(2, 6);
    s.update(2, 2);
    s.update(0, 3);
    const RateEstimate e2 = rate_estimate(s, 2);
    EXPECT_TRUE(e2.valid());
    EXPECT_DOUBLE_EQ(e2.odd, 4.0);
    EXPECT_DOUBLE_EQ(e2.non_odd, 3.0);
    const RateEstimate e1 = rate_estimate(s, 1);
    EXPECT_FALSE(e1.odd_valid);
    EXPECT_EQ(e1.odd, 0.0);
    EXPECT_TRUE(e1.non_odd_valid);

    SufficientStats only(3);
    only.update(0, 1);
    const RateEstimate e0 = rate_estimate(only, 0);
    EXPECT_TRUE(e0.odd_valid);
    EXPECT_FALSE(e0.non_odd_valid);
    EXPECT_EQ(e0.non_odd, 0.0);
}

TEST(ModifiedGlr, MatrixStructure) {
    std::mt19937_64 gen(404);
    for (int trial = 0; trial < 1000; ++trial) {
        const SufficientStats s = random_stats(gen, 3 + trial % 6, 80, 12);
        const GlrState g = modified_glr(s);
        for (std::size_t i = 0; i < g.k; ++i) {
            double m = INFINITY;
            for (std::size_t j = 0; j < g.k; ++j) {
                if (i == j) continue;
                EXPECT_NEAR(g.at(i, j), averaged_log_likelihood(s, i).value - ml_log_likelihood(s, j).value, 1e-9);
                EXPECT_LE(g.at(i, j) + g.at(j, i), 0.0);
                m = std::min(m, g.at(i, j));
            }
            EXPECT_EQ(g.z_min[i], m);
            EXPECT_LE(g.z_min[i], g.leader_z());
        }
    }
}

TEST(ModifiedGlr, SymmetricStatsGiveUniformLeader) {
    SufficientStats s(4);
    for (std::size_t j = 0; j < 4; ++j) s.update(j, 3);
    const GlrState det = modified_glr(s);
    for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(det.z_min[i], det.z_min[0]);
    EXPECT_EQ(det.leader, 0u);

    Stream stream(12);
    std::vector<int> hits(4, 0);
    const int n = 40000;
    for (int t = 0; t < n; ++t) ++hits[modified_glr(s, stream).leader];
    for (int h : hits) EXPECT_NEAR(h, n / 4.0, 4.0 * std::sqrt(n * 0.25 * 0.75));
}

TEST(ModifiedGlr, TieBreakConsumesExactlyOneDraw) {
    SufficientStats s(3);
    s.update(0, 9);
    s.update(1, 0);
    s.update(2, 1);
    Stream a(3), b(3);
    const GlrState g = modified_glr(s, a);
    EXPECT_EQ(g.leader, 0u);
    (void)b.uniform();
    EXPECT_EQ(a(), b());
}

TEST(ModifiedGlr, LeaderTracksClearOddball) {
    SufficientStats s(5);
    for (int round = 0; round < 40; ++round)
        for (std::size_t j = 0; j < 5; ++j) s.update(j, j == 3 ? 10 : 1);
    const GlrState g = modified_glr(s);
    EXPECT_EQ(g.leader, 3u);
    EXPECT_GT(g.leader_z(), 0.0);
    for (std::size_t j = 0; j < 5; ++j)
        if (j != 3) { EXPECT_LT(g.z_min[j], 0.0); }
    EXPECT_DOUBLE_EQ(g.theta_hat[3].odd, 10.0);
    EXPECT_DOUBLE_EQ(g.theta_hat[3].non_odd, 1.0);
}
