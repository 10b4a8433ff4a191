#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cwhom/correlator.hpp"
#include "cwhom/errors.hpp"
#include "oracles.hpp"

namespace {

using namespace cwhom::correlator;

TEST(HistogramSpec, Geometry) {
    const HistogramSpec spec(0.5e-9, 2e-6);
    EXPECT_EQ(spec.bin_ps(), 500);
    EXPECT_EQ(spec.window_ps(), 2000000);
    EXPECT_EQ(spec.bin_count(), 8001u);
    EXPECT_EQ(spec.bin_of(0), 4000u);
    EXPECT_EQ(spec.bin_of(249), 4000u);
    EXPECT_EQ(spec.bin_of(250), 4001u);
    EXPECT_EQ(spec.bin_of(-250), 4000u);
    EXPECT_EQ(spec.bin_of(-251), 3999u);
    EXPECT_DOUBLE_EQ(spec.bin_center(4000), 0.0);
    EXPECT_NEAR(spec.bin_center(0), -2e-6, 1e-18);
}

TEST(HistogramSpec, RejectsBadGeometry) {
    EXPECT_THROW(HistogramSpec(0.0, 2e-6), cwhom::ConfigError);
    EXPECT_THROW(HistogramSpec(0.3e-9, 1e-9), cwhom::ConfigError);
    EXPECT_THROW(HistogramSpec(0.5e-9, 2.00025e-6), cwhom::ConfigError);
    EXPECT_THROW(HistogramSpec(0.5e-9, 0.0), cwhom::ConfigError);
}

TEST(Correlate, SinglePairLandsInItsBin) {
    const HistogramSpec spec(1e-9, 10e-9);
    const std::vector<TimestampPs> a{1000000}, b{1003400};
    const auto h = correlate(a, b, spec, 1e-3);
    EXPECT_EQ(h.total(), 1u);
    EXPECT_EQ(h.counts[spec.bin_of(3400)], 1u);
    EXPECT_EQ(h.counts[13], 1u);
    EXPECT_EQ(h.singles_a, 1u);
    EXPECT_EQ(h.singles_b, 1u);
}

TEST(Correlate, WindowEdgesAreInclusive) {
    const HistogramSpec spec(1e-9, 10e-9);
    const std::vector<TimestampPs> a{100000};
    const std::vector<TimestampPs> b{89999, 90000, 110000, 110001};
    const auto h = correlate(a, b, spec);
    EXPECT_EQ(h.total(), 2u);
    EXPECT_EQ(h.counts.front(), 1u);
    EXPECT_EQ(h.counts.back(), 1u);
}

TEST(Correlate, EmptyStreams) {
    const HistogramSpec spec(1e-9, 10e-9);
    const std::vector<TimestampPs> none, one{5};
    EXPECT_EQ(correlate(none, one, spec).total(), 0u);
    EXPECT_EQ(correlate(one, none, spec).total(), 0u);
}

TEST(Correlate, UnsortedInputNamesStreamAndIndex) {
    const HistogramSpec spec(1e-9, 10e-9);
    const std::vector<TimestampPs> good{1, 2, 3}, bad{1, 5, 5, 9};
    try {
        correlate(good, bad, spec);
        FAIL() << "expected UnsortedInputError";
    } catch (const cwhom::UnsortedInputError& e) {
        EXPECT_EQ(e.stream(), "B");
        EXPECT_EQ(e.index(), 2u);
    }
    try {
        correlate(bad, good, spec);
        FAIL() << "expected UnsortedInputError";
    } catch (const cwhom::UnsortedInputError& e) {
        EXPECT_EQ(e.stream(), "A");
    }
}

TEST(CorrelateProperty, MatchesBruteForce) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const std::int64_t bin = std::uniform_int_distribution<std::int64_t>(1, 2000)(rng);
        const std::int64_t half = std::uniform_int_distribution<std::int64_t>(1, 400)(rng);
        const HistogramSpec spec(bin * 1e-12, bin * half * 1e-12);
        const std::int64_t span = std::uniform_int_distribution<std::int64_t>(bin * half, bin * half * 50)(rng);
        const auto a = oracle::random_stream(rng, std::uniform_int_distribution<std::size_t>(0, 300)(rng), span);
        const auto b = oracle::random_stream(rng, std::uniform_int_distribution<std::size_t>(0, 300)(rng), span);
        const auto h = correlate(a, b, spec);
        ASSERT_EQ(h.counts, oracle::brute_force_histogram(a, b, bin, bin * half)) << "trial " << trial;
        ASSERT_EQ(h.total(), oracle::pair_count(a, b, bin * half));
    }
}

TEST(CorrelateProperty, SwappingChannelsMirrors) {
    std::mt19937_64 rng(7);
    const HistogramSpec spec(0.5e-9, 200e-9);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = oracle::random_stream(rng, 500, 5000000);
        const auto b = oracle::random_stream(rng, 500, 5000000);
        auto forward = correlate(a, b, spec).counts;
        const auto backward = correlate(b, a, spec).counts;
        // Mirroring is exact except for pairs on a bin boundary, which move by one bin.
        std::uint64_t boundary = 0;
        for (const auto ta : a) {
            for (const auto tb : b) {
                const auto d = tb - ta;
                if (std::abs(d) <= spec.window_ps() && (d + 250) % 500 == 0) ++boundary;
            }
        }
        std::reverse(forward.begin(), forward.end());
        std::uint64_t moved = 0;
        for (std::size_t i = 0; i < forward.size(); ++i) {
            moved += static_cast<std::uint64_t>(std::abs(static_cast<long long>(forward[i]) -
                                                         static_cast<long long>(backward[i])));
        }
        EXPECT_LE(moved, 2 * boundary);
    }
}

TEST(CorrelateProperty, CommonShiftInvariance) {
    std::mt19937_64 rng(8);
    const HistogramSpec spec(0.5e-9, 100e-9);
    for (int trial = 0; trial < 50; ++trial) {
        auto a = oracle::random_stream(rng, 400, 3000000);
        auto b = oracle::random_stream(rng, 400, 3000000);
        const auto before = correlate(a, b, spec).counts;
        const std::int64_t shift = std::uniform_int_distribution<std::int64_t>(0, 1000000000)(rng);
        for (auto& t : a) t += shift;
        for (auto& t : b) t += shift;
        EXPECT_EQ(correlate(a, b, spec).counts, before);
    }
}

TEST(CorrelateSegmented, AgreesAwayFromBoundaries) {
    std::mt19937_64 rng(9);
    const HistogramSpec spec(1e-9, 50e-9);
    const auto a = oracle::random_stream(rng, 20000, 100000000);
    const auto b = oracle::random_stream(rng, 20000, 100000000);
    const auto whole = correlate(a, b, spec, 1e-4);
    const auto one = correlate_segmented(a, b, spec, 1e-4, 1);
    EXPECT_EQ(one.counts, whole.counts);
    const auto split = correlate_segmented(a, b, spec, 1e-4, 8, 3);
    EXPECT_LE(split.total(), whole.total());
    std::uint64_t straddling = 0;
    const std::int64_t slice = 100000000 / 8;
    for (const auto ta : a) {
        for (const auto tb : b) {
            if (std::abs(tb - ta) <= spec.window_ps() && ta / slice != tb / slice) ++straddling;
        }
    }
    EXPECT_EQ(split.total() + straddling, whole.total());
    EXPECT_EQ(split, correlate_segmented(a, b, spec, 1e-4, 8, 1));
}

TEST(Merge, SumsAndChecksSpecs) {
    const HistogramSpec spec(1e-9, 10e-9);
    const std::vector<TimestampPs> a{0}, b{3000};
    const auto h = correlate(a, b, spec, 1e-6);
    const auto m = merge(h, h);
    EXPECT_EQ(m.total(), 2u);
    EXPECT_EQ(m.singles_a, 2u);
    EXPECT_DOUBLE_EQ(m.duration, 2e-6);
    EXPECT_THROW(merge(h, empty_histogram(HistogramSpec(1e-9, 20e-9))), cwhom::SpecMismatchError);
}

CoincidenceHistogram flat_histogram(const HistogramSpec& spec, std::uint64_t per_bin) {
    auto h = empty_histogram(spec);
    std::fill(h.counts.begin(), h.counts.end(), per_bin);
    return h;
}

TEST(Normalize, FlatHistogramIsUnity) {
    const HistogramSpec spec(1e-9, 400e-9);
    auto h = flat_histogram(spec, 100);
    // Edge bins see half their width inside the window.
    h.counts.front() = 50;
    h.counts.back() = 50;
    const auto f = normalize(h, default_wings(spec));
    EXPECT_NEAR(f.baseline, 100.0, 1.0);
    for (std::size_t i = 1; i + 1 < f.values.size(); ++i) {
        EXPECT_NEAR(f.values[i], 100.0 / f.baseline, 1e-12);
        EXPECT_NEAR(f.errors[i], 10.0 / f.baseline, 1e-12);
    }
    EXPECT_NEAR(f.values.front(), 1.0, 0.03);
    EXPECT_NEAR(f.values.back(), 1.0, 0.03);
}

TEST(Normalize, DipIsPreserved) {
    const HistogramSpec spec(1e-9, 400e-9);
    auto h = flat_histogram(spec, 1000);
    h.counts[spec.bin_of(0)] = 500;
    const auto f = normalize(h, default_wings(spec));
    EXPECT_NEAR(f.values[spec.bin_of(0)], 0.5, 0.01);
    EXPECT_EQ(f.centers.size(), spec.bin_count());
    EXPECT_DOUBLE_EQ(f.bin_width, 1e-9);
}

TEST(Normalize, Errors) {
    const HistogramSpec spec(1e-9, 400e-9);
    EXPECT_THROW(normalize(empty_histogram(spec), default_wings(spec)), cwhom::NormalizationError);
    const auto h = flat_histogram(spec, 10);
    EXPECT_THROW(normalize(h, WingRange{100e-9, 400e-9}), cwhom::ConfigError);
    EXPECT_THROW(normalize(h, WingRange{200e-9, 500e-9}), cwhom::ConfigError);
    EXPECT_THROW(normalize(h, WingRange{380e-9, 400e-9}), cwhom::ConfigError);
}

TEST(NormalizeProperty, RandomPoissonFlatFringeAveragesToOne) {
    std::mt19937_64 rng(31);
    const HistogramSpec spec(1e-9, 1e-6);
    for (int trial = 0; trial < 20; ++trial) {
        auto h = empty_histogram(spec);
        std::poisson_distribution<std::uint64_t> p(400.0);
        for (auto& c : h.counts) c = p(rng);
        const auto f = normalize(h, default_wings(spec));
        double mean = 0.0;
        for (const double v : f.values) mean += v;
        mean /= static_cast<double>(f.values.size());
        EXPECT_NEAR(mean, 1.0, 0.005);
    }
}

TEST(SinglesStats, RateGapAndViolations) {
    cwhom::lasersim::DetectorSpec d;
    d.dead_time = 22e-9;
    const std::vector<TimestampPs> ev{0, 30000, 60000, 70000};
    const auto s = singles_stats(ev, d, 1e-6);
    EXPECT_DOUBLE_EQ(s.rate, 4e6);
    EXPECT_NEAR(s.min_gap, 10e-9, 1e-18);
    EXPECT_EQ(s.dead_time_violations, 1u);
    EXPECT_EQ(singles_stats({}, d, 1.0).min_gap, 0.0);
}

TEST(FringeCsv, RoundTrip) {
    const HistogramSpec spec(1e-9, 200e-9);
    auto h = flat_histogram(spec, 37);
    h.counts[spec.bin_of(0)] = 11;
    const auto f = normalize(h, default_wings(spec));
    const auto csv = histogram_to_csv(h, f);
    EXPECT_EQ(csv.rfind("bin_center_ns,counts,normalized,error\n", 0), 0u);
    const auto back = fringe_from_csv(csv);
    ASSERT_EQ(back.values.size(), f.values.size());
    EXPECT_NEAR(back.bin_width, 1e-9, 1e-15);
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        EXPECT_NEAR(back.centers[i], f.centers[i], 1e-15);
        EXPECT_NEAR(back.values[i], f.values[i], 1e-8);
        EXPECT_NEAR(back.errors[i], f.errors[i], 1e-8);
        EXPECT_DOUBLE_EQ(back.counts[i], f.counts[i]);
    }
}

TEST(FringeCsv, Malformed) {
    EXPECT_THROW(fringe_from_csv(""), cwhom::FormatError);
    EXPECT_THROW(fringe_from_csv("a,b\n1,2\n"), cwhom::FormatError);
    EXPECT_THROW(fringe_from_csv("bin_center_ns,counts,normalized,error\n1,2,x,4\n"), cwhom::FormatError);
}

}  // namespace
