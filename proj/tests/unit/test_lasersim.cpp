#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include "cwhom/correlator.hpp"
#include "cwhom/errors.hpp"
#include "cwhom/lasersim.hpp"
#include "oracles.hpp"

namespace {

using namespace cwhom::lasersim;
using cwhom::spectral::FMTriangle;
using cwhom::spectral::Gaussian;
using cwhom::spectral::kPi;
using cwhom::spectral::Lorentzian;
using cwhom::spectral::Rectangular;

SourceSpec lorentzian_source(double fwhm, double detuning = 0.0) {
    SourceSpec s;
    s.lineshape = Lorentzian{fwhm};
    s.detuning = detuning;
    return s;
}

ExperimentConfig short_config(double duration) {
    ExperimentConfig c;
    c.source_1.lineshape = FMTriangle{1.2e6, 1e3, 5e6};
    c.source_1.rng_seed = 3;
    c.source_2.lineshape = Lorentzian{2.2e6};
    c.source_2.rng_seed = 4;
    c.duration = duration;
    c.segment_duration = 0.01;
    return c;
}

TEST(SynthesizeField, ZeroLinewidthIsConstantPhase) {
    const auto f = synthesize_field(lorentzian_source(1e-12), 1e-4, 2e-9, 5);
    ASSERT_EQ(f.samples.size(), 50000u);
    for (const auto& s : f.samples) EXPECT_LT(std::abs(s - f.samples.front()), 1e-6);
}

TEST(SynthesizeField, UnitModulus) {
    const auto f = synthesize_field(lorentzian_source(2.2e6, 1e6), 1e-4, 2e-9, 5);
    for (const auto& s : f.samples) EXPECT_NEAR(std::norm(s), 1.0, 1e-12);
}

TEST(SynthesizeField, LorentzianAutocorrelationAtCoherenceTime) {
    const double dt = 2e-9;
    const auto f = synthesize_field(lorentzian_source(2.2e6), 0.1, dt, 17);
    const auto lag = static_cast<std::size_t>(std::lround(144.69e-9 / dt));
    const auto acf = oracle::autocorrelation(f.samples, {lag});
    EXPECT_NEAR(acf[0], std::exp(-kPi * 2.2e6 * lag * dt), 0.02);
    EXPECT_NEAR(acf[0], 0.368, 0.02);
}

TEST(SynthesizeField, DetuningRotatesPhase) {
    const double dt = 2e-9;
    const auto f = synthesize_field(lorentzian_source(1e-12, 3.5e6), 1e-5, dt, 1);
    const double step = std::arg(f.samples[1] * std::conj(f.samples[0]));
    EXPECT_NEAR(step, 2.0 * kPi * 3.5e6 * dt, 1e-9);
}

TEST(SynthesizeField, FMInstantaneousFrequencyAtQuarterPeriod) {
    SourceSpec s;
    s.lineshape = FMTriangle{1e-9, 1e3, 4e6};
    const double dt = 2e-9;
    FieldSynthesizer synth(s, dt, 250e-6, 9);
    std::vector<double> phase(3);
    synth.generate_phase(phase);
    const double freq = std::remainder(phase[2] - phase[0], 2.0 * kPi) / (2.0 * dt) / (2.0 * kPi);
    EXPECT_NEAR(freq, 2e6, 2e3);
}

TEST(SynthesizeField, SamplingBoundEnforced) {
    EXPECT_THROW(synthesize_field(lorentzian_source(20e6), 1e-5, 2e-9, 1), cwhom::ConfigError);
}

TEST(SynthesizeField, RectangularAndGaussianFollowTheirCoherence) {
    const double dt = 2e-9;
    for (const auto& shape : {cwhom::spectral::Lineshape{Rectangular{4e6}}, cwhom::spectral::Lineshape{Gaussian{3e6}}}) {
        SourceSpec s;
        s.lineshape = shape;
        const auto f = synthesize_field(s, 0.05, dt, 23);
        const std::vector<std::size_t> lags{25, 50, 100};
        const auto acf = oracle::autocorrelation(f.samples, lags);
        for (std::size_t i = 0; i < lags.size(); ++i) {
            EXPECT_NEAR(acf[i], std::abs(cwhom::spectral::g1(shape, lags[i] * dt)), 0.03)
                << cwhom::spectral::kind_name(shape) << " lag " << lags[i];
        }
    }
}

TEST(InstantaneousDetuning, TriangleGeometry) {
    const FMTriangle fm{1.2e6, 1e3, 4e6};
    EXPECT_DOUBLE_EQ(instantaneous_detuning(fm, 0.0), 0.0);
    EXPECT_NEAR(instantaneous_detuning(fm, 250e-6), 2e6, 1e-3);
    EXPECT_NEAR(instantaneous_detuning(fm, 500e-6), 0.0, 1e-3);
    EXPECT_NEAR(instantaneous_detuning(fm, 750e-6), -2e6, 1e-3);
    EXPECT_GT(instantaneous_detuning(fm, 1e-6), 0.0);
}

TEST(InstantaneousDetuning, WrongVariant) {
    EXPECT_THROW(instantaneous_detuning(Lorentzian{1e6}, 0.0), cwhom::WrongLineshapeError);
}

TEST(Beamsplit, SingleInputSplitsEvenly) {
    const auto f1 = synthesize_field(lorentzian_source(1e6), 1e-6, 2e-9, 1);
    const auto f2 = synthesize_field(lorentzian_source(1e6), 1e-6, 2e-9, 2);
    const auto out = beamsplit(f1, f2, 1.0, 4e5, 0.0);
    for (std::size_t k = 0; k < out.a.rate.size(); ++k) {
        EXPECT_NEAR(out.a.rate[k], 2e5, 1e-6);
        EXPECT_NEAR(out.b.rate[k], 2e5, 1e-6);
    }
}

TEST(Beamsplit, DistinguishableInputsDoNotBeat) {
    const auto f1 = synthesize_field(lorentzian_source(1e6), 1e-6, 2e-9, 1);
    const auto f2 = synthesize_field(lorentzian_source(1e6, 2e6), 1e-6, 2e-9, 2);
    const auto out = beamsplit(f1, f2, 0.0, 3e5, 5e5);
    for (std::size_t k = 0; k < out.a.rate.size(); ++k) {
        EXPECT_NEAR(out.a.rate[k], 4e5, 1e-6);
        EXPECT_NEAR(out.b.rate[k], 4e5, 1e-6);
    }
}

TEST(Beamsplit, DetunedInputsBeatAtDifferenceFrequency) {
    const double dt = 0.5e-9;
    const auto f1 = synthesize_field(lorentzian_source(1e-12, 3.5e6), 2e-6, dt, 1);
    const auto f2 = synthesize_field(lorentzian_source(1e-12), 2e-6, dt, 2);
    const auto out = beamsplit(f1, f2, 1.0, 1e6, 1e6);
    const auto [lo, hi] = std::minmax_element(out.a.rate.begin(), out.a.rate.end());
    EXPECT_NEAR(*lo, 0.0, 1e3);
    EXPECT_NEAR(*hi, 2e6, 1e3);
    // Successive upward crossings of the mean are one beat period apart.
    std::vector<double> ups;
    for (std::size_t k = 1; k < out.a.rate.size(); ++k) {
        if (out.a.rate[k - 1] < 1e6 && out.a.rate[k] >= 1e6) ups.push_back(k * dt);
    }
    ASSERT_GE(ups.size(), 3u);
    EXPECT_NEAR(ups[2] - ups[1], 285.7e-9, 1e-9);
}

TEST(BeamsplitProperty, EnergyConservedEverySample) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto f1 = synthesize_field(lorentzian_source(3e6 * u(rng), 4e6 * (u(rng) - 0.5)), 2e-5, 2e-9, rng());
        const auto f2 = synthesize_field(lorentzian_source(3e6 * u(rng), 4e6 * (u(rng) - 0.5)), 2e-5, 2e-9, rng());
        const double r1 = 1e6 * u(rng), r2 = 1e6 * u(rng), m = u(rng);
        const auto out = beamsplit(f1, f2, m, r1, r2);
        for (std::size_t k = 0; k < out.a.rate.size(); ++k) {
            EXPECT_NEAR(out.a.rate[k] + out.b.rate[k], r1 + r2, 1e-12 * (r1 + r2));
        }
    }
}

TEST(Beamsplit, PhasePathMatchesComplexPath) {
    SourceSpec s1 = lorentzian_source(2e6, 1e6);
    SourceSpec s2;
    s2.lineshape = FMTriangle{1e6, 1e3, 4e6};
    const double dt = 2e-9;
    FieldSynthesizer p1(s1, dt, 0.0, 8), p2(s2, dt, 0.0, 9), c1(s1, dt, 0.0, 8), c2(s2, dt, 0.0, 9);
    std::vector<double> ph1(4096), ph2(4096);
    std::vector<std::complex<double>> e1(4096), e2(4096);
    p1.generate_phase(ph1);
    p2.generate_phase(ph2);
    c1.generate(e1);
    c2.generate(e2);
    std::vector<double> a1(4096), b1(4096), a2(4096), b2(4096);
    beamsplit_phases_into(ph1, ph2, 0.8, 3e5, 7e5, a1, b1);
    beamsplit_into(e1, e2, 0.8, 3e5, 7e5, a2, b2);
    for (std::size_t k = 0; k < a1.size(); ++k) {
        EXPECT_NEAR(a1[k], a2[k], 1e-6);
        EXPECT_NEAR(b1[k], b2[k], 1e-6);
    }
}

TEST(Beamsplit, MismatchedStreamsRejected) {
    const auto f1 = synthesize_field(lorentzian_source(1e6), 1e-6, 2e-9, 1);
    const auto f2 = synthesize_field(lorentzian_source(1e6), 2e-6, 2e-9, 2);
    EXPECT_THROW(beamsplit(f1, f2, 1.0, 1.0, 1.0), cwhom::LengthMismatchError);
    auto f3 = f1;
    f3.dt = 1e-9;
    EXPECT_THROW(beamsplit(f1, f3, 1.0, 1.0, 1.0), cwhom::LengthMismatchError);
}

TEST(Detect, SilentDetector) {
    IntensityStream s{2e-9, 0.0, std::vector<double>(100000, 1e6)};
    DetectorSpec d{0.0, 22e-9, 0.0, 0.0};
    EXPECT_TRUE(detect(s, d, 1).empty());
}

TEST(Detect, PoissonCountAtConstantIntensity) {
    IntensityStream s{1e-6, 0.0, std::vector<double>(10000000, 1e5)};
    DetectorSpec d{1.0, 0.0, 0.0, 0.0};
    const auto events = detect(s, d, 99);
    EXPECT_NEAR(static_cast<double>(events.size()), 1e6, 3e3);
}

TEST(Detect, DeadTimeIsAHardFloor) {
    IntensityStream s{2e-9, 0.0, std::vector<double>(5000000, 2e7)};
    DetectorSpec d{1.0, 22e-9, 100.0, 0.35e-9};
    const auto events = detect(s, d, 4);
    ASSERT_GT(events.size(), 1000u);
    for (std::size_t i = 1; i < events.size(); ++i) EXPECT_GE(events[i] - events[i - 1], 22000);
    const auto stats = cwhom::correlator::singles_stats(events, d, 0.01);
    EXPECT_EQ(stats.dead_time_violations, 0u);
    EXPECT_GE(stats.min_gap, 22e-9);
}

TEST(Detect, NegativeIntensityRejected) {
    IntensityStream s{2e-9, 0.0, {1.0, -1.0}};
    EXPECT_THROW(detect(s, DetectorSpec{}, 1), cwhom::ConfigError);
}

TEST(RunExperiment, ZeroDurationIsEmpty) {
    auto c = short_config(0.0);
    const auto r = run_experiment(c);
    EXPECT_TRUE(r.events_a.empty());
    EXPECT_TRUE(r.events_b.empty());
    EXPECT_EQ(r.metadata.singles_rate_a, 0.0);
}

TEST(RunExperiment, SinglesMatchMeanRate) {
    const auto r = run_experiment(short_config(0.1));
    EXPECT_NEAR(r.metadata.singles_rate_a, 5e5, 0.02 * 5e5);
    EXPECT_NEAR(r.metadata.singles_rate_b, 5e5, 0.02 * 5e5);
}

TEST(RunExperiment, DeterministicAcrossRunsAndThreads) {
    auto c = short_config(0.03);
    const auto first = run_experiment(c);
    const auto second = run_experiment(c);
    c.threads = 3;
    const auto threaded = run_experiment(c);
    EXPECT_EQ(first.events_a, second.events_a);
    EXPECT_EQ(first.events_b, second.events_b);
    EXPECT_EQ(first.events_a, threaded.events_a);
    EXPECT_EQ(first.events_b, threaded.events_b);
}

TEST(RunExperiment, SeedsChangeTheRealization) {
    auto c = short_config(0.01);
    const auto first = run_experiment(c);
    c.source_1.rng_seed = 77;
    EXPECT_NE(first.events_a, run_experiment(c).events_a);
}

TEST(RunExperiment, StreamsAreStrictlyIncreasingAndRespectDeadTime) {
    const auto r = run_experiment(short_config(0.02));
    for (const auto* s : {&r.events_a, &r.events_b}) {
        ASSERT_FALSE(s->empty());
        EXPECT_GE(s->front(), 0);
        for (std::size_t i = 1; i < s->size(); ++i) EXPECT_GE((*s)[i] - (*s)[i - 1], 22000);
    }
}

TEST(Validate, SamplingAndDurationInvariants) {
    auto c = short_config(0.1);
    c.sample_dt = 5e-9;
    EXPECT_THROW(validate(c), cwhom::ConfigError);
    c = short_config(1e-6);
    EXPECT_THROW(validate(c), cwhom::ConfigError);
    c = short_config(0.1);
    c.mode_overlap = 1.5;
    EXPECT_THROW(validate(c), cwhom::ConfigError);
    c = short_config(0.1);
    c.source_1.mean_rate = 0.0;
    EXPECT_THROW(validate(c), cwhom::ConfigError);
    c = short_config(0.1);
    c.source_2.extra_delay = -1e-9;
    EXPECT_THROW(validate(c), cwhom::ConfigError);
}

TEST(ExpectedVisibility, BalancedAndImbalanced) {
    auto c = short_config(0.1);
    c.mode_overlap = std::sqrt(0.864);
    EXPECT_NEAR(expected_visibility(c), 0.432, 1e-12);
    c.mode_overlap = 1.0;
    c.source_2.mean_rate = 1.5e6;
    EXPECT_NEAR(expected_visibility(c), 2.0 * 0.5 * 1.5 / 4.0, 1e-12);
}

TEST(DeriveSeed, DistinctStreams) {
    EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
    EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
    EXPECT_EQ(derive_seed(5, 2, 3), derive_seed(5, 2, 3));
}

}  // namespace
