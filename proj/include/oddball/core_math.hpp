#ifndef ODDBALL_CORE_MATH_HPP
#define ODDBALL_CORE_MATH_HPP

// Scalar primitives for Poisson models. Everything here works in natural-log
// space and follows the 0*log(0) = 0 convention.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace oddball {

/// Natural log of a probability or likelihood. May be -inf for an impossible
/// event; never NaN.
struct LogProb {
    double value = 0.0;

    constexpr explicit LogProb(double v = 0.0) : value(v) {}
    [[nodiscard]] bool impossible() const { return value == -std::numeric_limits<double>::infinity(); }
    friend constexpr auto operator<=>(const LogProb&, const LogProb&) = default;
};

namespace detail {

[[noreturn]] inline void domain_fail(const char* fn, const std::string& what) {
    throw std::domain_error(std::string(fn) + ": " + what);
}

}  // namespace detail

/// Relative entropy between Poisson laws with means x and y:
/// x log(x/y) - x + y.
inline double poisson_kl(double x, double y) {
    if (!(y > 0.0) || !std::isfinite(y)) detail::domain_fail("poisson_kl", "second argument must be positive");
    if (!(x >= 0.0) || !std::isfinite(x)) detail::domain_fail("poisson_kl", "first argument must be nonnegative");
    if (x == 0.0) return y;
    const double v = x * std::log(x / y) - x + y;
    // Cancellation can leave a tiny negative residue when x ~ y.
    return v > 0.0 ? v : 0.0;
}

/// Partial sum of the power-series form of poisson_kl(v - a, v - b):
///
///   sum_{l=1..terms} (a^{l+1} - b^l (a + (a-b) l)) / (v^l l (l+1))
///
/// Every summand is nonnegative, so partial sums increase monotonically to
/// the closed form. At v == 1 and a == 1 the summand telescopes to
/// (1/l - 1/(l+1)) - (b^l/l - b^{l+1}/(l+1)) and decays only like 1/l^2, so
/// the tail (1 - b^{terms+1})/(terms+1) is added in closed form and the
/// boundary value 1 - b is reached at any depth.
inline double poisson_kl_series(double v, double a, double b, std::int64_t terms) {
    if (!(v >= 1.0) || !std::isfinite(v)) detail::domain_fail("poisson_kl_series", "v must be >= 1");
    if (!(a >= 0.0 && a <= 1.0)) detail::domain_fail("poisson_kl_series", "a must lie in [0,1]");
    if (!(b >= 0.0 && b <= 1.0)) detail::domain_fail("poisson_kl_series", "b must lie in [0,1]");
    if (terms <= 0) detail::domain_fail("poisson_kl_series", "terms must be positive");
    if (v == 1.0 && b == 1.0 && a < 1.0)
        detail::domain_fail("poisson_kl_series", "divergent at v = 1, b = 1, a < 1");

    double sum = 0.0;
    double a_pow = a * a;   // a^{l+1}
    double b_pow = b;       // b^l
    double v_pow = v;       // v^l
    for (std::int64_t l = 1; l <= terms; ++l) {
        const double ld = static_cast<double>(l);
        double num = a_pow - b_pow * (a + (a - b) * ld);
        if (num < 0.0) num = 0.0;  // exact value is >= 0 by convexity of x^{l+1}
        sum += num / (v_pow * ld * (ld + 1.0));
        a_pow *= a;
        b_pow *= b;
        v_pow *= v;
        if (a_pow == 0.0 && b_pow == 0.0) break;
        if (!std::isfinite(v_pow)) break;
    }
    if (v == 1.0 && a == 1.0) sum += (1.0 - std::pow(b, static_cast<double>(terms) + 1.0)) / (static_cast<double>(terms) + 1.0);
    return sum;
}

/// d_b(x, 1-x) = x log(x/(1-x)) + (1-x) log((1-x)/x).
inline double binary_relative_entropy(double x) {
    if (!(x > 0.0 && x < 1.0)) detail::domain_fail("binary_relative_entropy", "argument must lie in (0,1)");
    const double y = 1.0 - x;
    // Written so that f(x) and f(1-x) are exact negations factor by factor.
    return (x - y) * (std::log(x) - std::log(y));
}

/// ln Gamma(x) for x > 0.
inline double log_gamma(double x) {
    if (!(x > 0.0) || std::isnan(x)) detail::domain_fail("log_gamma", "argument must be positive");
#if defined(__GLIBC__)
    int sign = 0;
    return ::lgamma_r(x, &sign);  // reentrant: std::lgamma writes the global signgam
#else
    return std::lgamma(x);
#endif
}

/// ln(rate^count e^{-rate} / count!).
inline LogProb poisson_log_pmf(std::uint64_t count, double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) detail::domain_fail("poisson_log_pmf", "rate must be positive");
    const double l = static_cast<double>(count);
    const double term = count == 0 ? 0.0 : l * std::log(rate);
    return LogProb(term - rate - log_gamma(l + 1.0));
}

}  // namespace oddball

#endif  // ODDBALL_CORE_MATH_HPP
