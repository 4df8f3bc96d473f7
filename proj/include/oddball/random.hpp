#ifndef ODDBALL_RANDOM_HPP
#define ODDBALL_RANDOM_HPP

// Seeded random streams and exact Poisson sampling. All conversions from raw
// bits are done here rather than through <random> distributions, whose
// output is implementation-defined, so results are reproducible across
// standard libraries.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>

#include "oddball/core_math.hpp"

namespace oddball {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for an indexed sub-stream: seed XOR a stable hash of the indices.
/// Depends only on its arguments, so parallel and serial drivers agree.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> indices) {
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (std::uint64_t i : indices) h = mix64(h ^ mix64(i));
    return seed ^ h;
}

/// A trial-owned random stream. Satisfies UniformRandomBitGenerator.
class Stream {
public:
    using result_type = std::uint64_t;

    explicit Stream(std::uint64_t seed) : engine_(mix64(seed)) {}

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1).
    double uniform_open() {
        double u;
        do u = uniform();
        while (u == 0.0);
        return u;
    }

    /// Uniform integer in [0, n) from one uniform() draw.
    std::size_t index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Stream::index: empty range");
        auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

private:
    std::mt19937_64 engine_;
};

namespace detail {

// Sequential-search inversion; expected cost O(rate).
inline std::uint64_t poisson_inversion(double rate, Stream& stream) {
    const double u = stream.uniform();
    double p = std::exp(-rate);
    double cdf = p;
    std::uint64_t x = 0;
    while (u > cdf) {
        ++x;
        p *= rate / static_cast<double>(x);
        const double next = cdf + p;
        if (next == cdf) break;  // remaining mass below double resolution
        cdf = next;
    }
    return x;
}

// Transformed rejection with squeeze (PTRS, Hoermann 1993), for rate >= 10.
inline std::uint64_t poisson_ptrs(double rate, Stream& stream) {
    const double slam = std::sqrt(rate);
    const double loglam = std::log(rate);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = stream.uniform() - 0.5;
        const double v = stream.uniform();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + rate + 0.43);
        if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -rate + k * loglam - log_gamma(k + 1.0))
            return static_cast<std::uint64_t>(k);
    }
}

}  // namespace detail

/// Exact Poisson(rate) draw.
inline std::uint64_t sample_poisson(double rate, Stream& stream) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw std::domain_error("sample_poisson: rate must be positive");
    return rate < 10.0 ? detail::poisson_inversion(rate, stream) : detail::poisson_ptrs(rate, stream);
}

}  // namespace oddball

#endif  // ODDBALL_RANDOM_HPP
