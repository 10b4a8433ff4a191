#pragma once

// Monte Carlo synthesis of two independent phase-diffusing laser fields,
// 50:50 beamsplitter mixing and single-photon detection.

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "cwhom/spectral.hpp"

namespace cwhom::lasersim {

using spectral::Lineshape;
using TimestampPs = std::int64_t;
using Rng = boost::random::mt19937_64;

enum class Channel : std::uint8_t { A = 0, B = 1 };

struct PhotonEvent {
    TimestampPs timestamp_ps;
    Channel channel;

    friend bool operator==(const PhotonEvent&, const PhotonEvent&) = default;
};

struct SourceSpec {
    double detuning = 0.0;  ///< Hz from the shared reference line
    Lineshape lineshape = spectral::Lorentzian{1e6};
    double mean_rate = 5e5;   ///< expected detected photons/s contributed by this source
    double extra_delay = 0.0;  ///< s
    std::uint64_t rng_seed = 1;
};

struct DetectorSpec {
    double efficiency = 0.5;
    double dead_time = 22e-9;     ///< s, non-paralyzable
    double dark_rate = 100.0;     ///< counts/s
    double jitter_sigma = 0.35e-9;  ///< s
};

struct ExperimentConfig {
    SourceSpec source_1;
    SourceSpec source_2;
    DetectorSpec detector_a;
    DetectorSpec detector_b;
    double mode_overlap = 1.0;  ///< power fraction of each input in the common mode
    double duration = 2.0;      ///< s
    double sample_dt = 2e-9;    ///< s
    double segment_duration = 0.05;  ///< s; independent simulation segments
    std::uint64_t detector_seed = 0x5eedULL;
    unsigned threads = 1;
};

/// Sweep rate used when a Rectangular lineshape is synthesized as a
/// triangular FM sweep.
inline constexpr double kRectangularSweepRate = 1e3;
/// Correlation time of the Ornstein-Uhlenbeck frequency noise that
/// synthesizes a Gaussian lineshape.
inline constexpr double kGaussianFrequencyMemory = 50e-6;

void validate(const SourceSpec& spec);
void validate(const DetectorSpec& spec);
/// Checks every config invariant including the sampling and duration bounds.
void validate(const ExperimentConfig& config);

/// Largest sample_dt allowed for the pair of sources.
double max_sample_dt(const SourceSpec& s1, const SourceSpec& s2);

/// Photon flux at the beamsplitter inputs that yields the sources' mean
/// detected rates with the configured detector efficiencies.
std::pair<double, double> input_rates(const ExperimentConfig& config);

/// Classical-limit visibility 2 m^2 r1 r2 / (r1 + r2)^2 implied by overlap m.
double expected_visibility(const ExperimentConfig& config);

/// Symmetric triangle wave, zero mean, starting at 0 and rising, with
/// peak-to-peak `deviation` and period 1/mod_rate. Throws
/// WrongLineshapeError unless the lineshape is FMTriangle.
double instantaneous_detuning(const Lineshape& shape, double t);

struct FieldStream {
    double dt = 0.0;
    double t0 = 0.0;
    std::vector<std::complex<double>> samples;
};

struct IntensityStream {
    double dt = 0.0;
    double t0 = 0.0;
    std::vector<double> rate;  ///< photons/s
};

/// Incremental generator of the optical phase phi(t) of one source;
/// consecutive calls continue the same realization.
class FieldSynthesizer {
public:
    FieldSynthesizer(const SourceSpec& spec, double dt, double t_start, std::uint64_t seed);

    /// phi at consecutive samples, radians, reduced to a few multiples of 2 pi.
    void generate_phase(std::span<double> out);
    /// e^{i phi} at consecutive samples.
    void generate(std::span<std::complex<double>> out);

private:
    double dt_;
    double detuning_step_;        // cycles per sample
    double detuning_cycles_ = 0.0;  // in [0, 1)
    double sweep_amplitude_ = 0.0;  // half of peak-to-peak, Hz
    double sweep_period_ = 0.0;
    double sweep_time_ = 0.0;     // position within the sweep period
    double diffusion_sigma_ = 0.0;
    double ou_sigma_ = 0.0;
    double ou_decay_ = 0.0;
    double ou_kick_ = 0.0;
    double ou_frequency_ = 0.0;
    double random_phase_ = 0.0;
    Rng rng_;
    boost::random::normal_distribution<double> normal_{0.0, 1.0};
    std::vector<double> scratch_;
};

/// Unit-modulus baseband samples of one source. Throws ConfigError when dt
/// violates the sampling bound for this source.
FieldStream synthesize_field(const SourceSpec& spec, double duration, double dt,
                             std::uint64_t seed);

struct IntensityPair {
    IntensityStream a;
    IntensityStream b;
};

/// Lossless 50:50 mixing: the common-mode part of each input interferes as
/// (a1 + i a2)/sqrt2 and (i a1 + a2)/sqrt2, the rest splits evenly.
IntensityPair beamsplit(const FieldStream& field_1, const FieldStream& field_2,
                        double mode_overlap, double rate_1, double rate_2);

void beamsplit_into(std::span<const std::complex<double>> field_1,
                    std::span<const std::complex<double>> field_2, double mode_overlap,
                    double rate_1, double rate_2, std::span<double> out_a, std::span<double> out_b);

/// Same mixing for unit-modulus fields given by their phases:
/// I_a,b = (r1 + r2)/2 -/+ m sqrt(r1 r2) sin(phi_2 - phi_1).
void beamsplit_phases_into(std::span<const double> phase_1, std::span<const double> phase_2,
                           double mode_overlap, double rate_1, double rate_2,
                           std::span<double> out_a, std::span<double> out_b);

/// Poisson thinning of a rate stream into detection events, with uniform
/// intra-sample placement and Gaussian jitter. Call finalize_events() on the
/// collected raw times to apply ordering and dead time.
class DetectorSampler {
public:
    DetectorSampler(const DetectorSpec& spec, std::uint64_t seed);

    void consume(std::span<const double> rate, double t0, double dt,
                 std::vector<TimestampPs>& raw_out);

private:
    DetectorSpec spec_;
    Rng rng_;
    boost::random::exponential_distribution<double> exponential_{1.0};
    boost::random::normal_distribution<double> normal_{0.0, 1.0};
    double remaining_;
};

/// Sorts, drops negative timestamps and applies non-paralyzable dead time.
/// The result is strictly increasing.
void finalize_events(std::vector<TimestampPs>& events, double dead_time);

std::vector<TimestampPs> detect(const IntensityStream& intensity, const DetectorSpec& spec,
                                std::uint64_t seed);

struct RunMetadata {
    double duration = 0.0;
    double singles_rate_a = 0.0;
    double singles_rate_b = 0.0;
    double input_rate_1 = 0.0;
    double input_rate_2 = 0.0;
    double expected_visibility = 0.0;
    std::int64_t samples = 0;
    std::size_t segments = 0;
};

struct RunResult {
    std::vector<TimestampPs> events_a;
    std::vector<TimestampPs> events_b;
    RunMetadata metadata;
};

/// synthesize -> beamsplit -> detect on both channels, split into
/// independently seeded time segments. Output is independent of
/// config.threads.
RunResult run_experiment(const ExperimentConfig& config);

/// splitmix64-based seed derivation.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

}  // namespace cwhom::lasersim
