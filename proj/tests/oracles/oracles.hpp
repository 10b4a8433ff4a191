#pragma once

// Independent reference computations for tests. Nothing here calls the
// library's own numerics; each oracle is the slow, obvious version.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

/// O(Na*Nb) all-pairs histogram of dT = b - a with half-open bins centred on
/// multiples of bin_ps, keeping pairs with |dT| <= window_ps.
inline std::vector<std::uint64_t> brute_force_histogram(const std::vector<std::int64_t>& a,
                                                        const std::vector<std::int64_t>& b,
                                                        std::int64_t bin_ps, std::int64_t window_ps) {
    const std::int64_t half = window_ps / bin_ps;
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(2 * half + 1), 0);
    for (const auto ta : a) {
        for (const auto tb : b) {
            const std::int64_t d = tb - ta;
            if (d < -window_ps || d > window_ps) continue;
            // Bin k holds k*bin - bin/2 <= d < k*bin + bin/2.
            const auto k = static_cast<std::int64_t>(
                std::floor((static_cast<long double>(d) + 0.5L * bin_ps) / bin_ps));
            counts[static_cast<std::size_t>(k + half)]++;
        }
    }
    return counts;
}

inline std::uint64_t pair_count(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b,
                                std::int64_t window_ps) {
    std::uint64_t n = 0;
    for (const auto ta : a) {
        for (const auto tb : b) n += (tb - ta >= -window_ps && tb - ta <= window_ps) ? 1 : 0;
    }
    return n;
}

/// Strictly increasing random timestamps in [0, span_ps).
inline std::vector<std::int64_t> random_stream(std::mt19937_64& rng, std::size_t n, std::int64_t span_ps) {
    std::uniform_int_distribution<std::int64_t> pick(0, span_ps - 1);
    std::vector<std::int64_t> out(n);
    for (auto& t : out) t = pick(rng);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Composite Simpson integral of f on [lo, hi] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, std::size_t panels) {
    if (panels % 2) ++panels;
    const double h = (hi - lo) / static_cast<double>(panels);
    double sum = f(lo) + f(hi);
    for (std::size_t i = 1; i < panels; ++i) sum += f(lo + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

/// Smallest t in (0, t_max] with f(t) <= level, located by a dense scan with
/// step `step` and linear interpolation.
inline double dense_crossing(const std::function<double(double)>& f, double level, double step, double t_max) {
    double prev = f(0.0);
    for (double t = step; t <= t_max; t += step) {
        const double cur = f(t);
        if (cur <= level) return t - step + (prev - level) / (prev - cur) * step;
        prev = cur;
    }
    return NAN;
}

/// Poisson-noised histogram of an expected-count curve.
inline std::vector<double> poisson_counts(std::mt19937_64& rng, const std::vector<double>& expected) {
    std::vector<double> out(expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        std::poisson_distribution<long long> p(expected[i]);
        out[i] = static_cast<double>(p(rng));
    }
    return out;
}

/// |<conj(e(t)) e(t+lag)>| over a sample stream, for each lag in samples.
inline std::vector<double> autocorrelation(const std::vector<std::complex<double>>& e,
                                           const std::vector<std::size_t>& lags) {
    std::vector<double> out;
    for (const auto lag : lags) {
        std::complex<double> acc{0.0, 0.0};
        const std::size_t n = e.size() - lag;
        for (std::size_t i = 0; i < n; ++i) acc += std::conj(e[i]) * e[i + lag];
        out.push_back(std::abs(acc) / static_cast<double>(n));
    }
    return out;
}

}  // namespace oracle
