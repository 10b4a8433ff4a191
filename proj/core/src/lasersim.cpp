#include "cwhom/lasersim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <type_traits>

#include <fmt/format.h>

#include "cwhom/errors.hpp"

namespace cwhom::lasersim {
namespace {

using spectral::kPi;
constexpr double kTwoPi = 2.0 * kPi;
constexpr std::size_t kChunk = 8192;

constexpr std::uint64_t kStreamField1 = 1;
constexpr std::uint64_t kStreamField2 = 2;
constexpr std::uint64_t kStreamDetectorA = 3;
constexpr std::uint64_t kStreamDetectorB = 4;
constexpr std::uint64_t kStreamDelay = 5;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double fractional(double cycles) { return cycles - std::floor(cycles); }

double unit_uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Integral of the zero-mean triangle wave over [0, u], u in [0, period).
double triangle_integral(double u, double amplitude, double period) {
    const double quarter = 0.25 * period;
    if (u < quarter) return 2.0 * amplitude * u * u / period;
    if (u < 3.0 * quarter) {
        return amplitude * period / 8.0 + 2.0 * amplitude * (u - quarter) -
               2.0 * amplitude * (u * u - quarter * quarter) / period;
    }
    return amplitude * period / 8.0 +
           2.0 * amplitude * (u * u - 9.0 * quarter * quarter) / period -
           4.0 * amplitude * (u - 3.0 * quarter);
}

double triangle_value(double t, double amplitude, double period) {
    const double u = t - period * std::floor(t / period);
    const double x = u / period;
    if (x < 0.25) return 4.0 * amplitude * x;
    if (x < 0.75) return 2.0 * amplitude - 4.0 * amplitude * x;
    return 4.0 * amplitude * x - 4.0 * amplitude;
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
    return splitmix64(splitmix64(base ^ splitmix64(stream)) + index);
}

void validate(const SourceSpec& spec) {
    spectral::validate(spec.lineshape);
    require(std::isfinite(spec.detuning), "source detuning must be finite");
    require(spec.mean_rate > 0.0 && std::isfinite(spec.mean_rate),
            fmt::format("source mean_rate must be > 0, got {}", spec.mean_rate));
    require(spec.extra_delay >= 0.0 && std::isfinite(spec.extra_delay),
            fmt::format("source extra_delay must be >= 0, got {}", spec.extra_delay));
}

void validate(const DetectorSpec& spec) {
    require(spec.efficiency >= 0.0 && spec.efficiency <= 1.0,
            fmt::format("detector efficiency must be in [0, 1], got {}", spec.efficiency));
    require(spec.dead_time >= 0.0, fmt::format("detector dead_time must be >= 0, got {}", spec.dead_time));
    require(spec.dark_rate >= 0.0, fmt::format("detector dark_rate must be >= 0, got {}", spec.dark_rate));
    require(spec.jitter_sigma >= 0.0,
            fmt::format("detector jitter_sigma must be >= 0, got {}", spec.jitter_sigma));
}

double max_sample_dt(const SourceSpec& s1, const SourceSpec& s2) {
    const double extent = std::max({spectral::spectral_extent(s1.lineshape) + std::abs(s1.detuning),
                                    spectral::spectral_extent(s2.lineshape) + std::abs(s2.detuning),
                                    std::abs(s1.detuning - s2.detuning)});
    return 1.0 / (50.0 * extent);
}

void validate(const ExperimentConfig& config) {
    validate(config.source_1);
    validate(config.source_2);
    validate(config.detector_a);
    validate(config.detector_b);
    require(config.mode_overlap >= 0.0 && config.mode_overlap <= 1.0,
            fmt::format("mode_overlap must be in [0, 1], got {}", config.mode_overlap));
    require(config.duration >= 0.0 && std::isfinite(config.duration),
            fmt::format("duration must be >= 0, got {}", config.duration));
    require(config.sample_dt > 0.0, fmt::format("sample_dt must be > 0, got {}", config.sample_dt));
    require(config.segment_duration > 0.0,
            fmt::format("segment_duration must be > 0, got {}", config.segment_duration));
    const double limit = max_sample_dt(config.source_1, config.source_2);
    require(config.sample_dt <= limit * (1.0 + 1e-12),
            fmt::format("sample_dt {} s exceeds 1/(50 * spectral extent) = {} s", config.sample_dt,
                        limit));
    if (config.duration > 0.0) {
        const spectral::FringeModel model(0.5, config.source_1.lineshape, config.source_2.lineshape,
                                          0.0);
        const double width = spectral::fringe_metrics(model).coherence_half_width;
        require(config.duration >= 1000.0 * width,
                fmt::format("duration {} s is shorter than 1000 fringe widths ({} s)",
                            config.duration, 1000.0 * width));
    }
}

std::pair<double, double> input_rates(const ExperimentConfig& config) {
    const double mean_efficiency = 0.5 * (config.detector_a.efficiency + config.detector_b.efficiency);
    const double scale = mean_efficiency > 0.0 ? 1.0 / mean_efficiency : 1.0;
    return {config.source_1.mean_rate * scale, config.source_2.mean_rate * scale};
}

double expected_visibility(const ExperimentConfig& config) {
    const auto [r1, r2] = input_rates(config);
    const double m = config.mode_overlap;
    return 2.0 * m * m * r1 * r2 / ((r1 + r2) * (r1 + r2));
}

double instantaneous_detuning(const Lineshape& shape, double t) {
    const auto* fm = std::get_if<spectral::FMTriangle>(&shape);
    if (fm == nullptr) {
        throw WrongLineshapeError("instantaneous_detuning requires an FMTriangle lineshape, got " +
                                  spectral::kind_name(shape));
    }
    return triangle_value(t, 0.5 * fm->deviation, 1.0 / fm->mod_rate);
}

FieldSynthesizer::FieldSynthesizer(const SourceSpec& spec, double dt, double t_start,
                                   std::uint64_t seed)
    : dt_(dt), detuning_step_(spec.detuning * dt), rng_(seed) {
    double diffusion_fwhm = 0.0;
    std::visit(
        [&](const auto& shape) {
            using T = std::decay_t<decltype(shape)>;
            if constexpr (std::is_same_v<T, spectral::Lorentzian>) {
                diffusion_fwhm = shape.fwhm;
            } else if constexpr (std::is_same_v<T, spectral::Rectangular>) {
                sweep_amplitude_ = 0.5 * shape.width;
                sweep_period_ = 1.0 / kRectangularSweepRate;
            } else if constexpr (std::is_same_v<T, spectral::Gaussian>) {
                ou_sigma_ = shape.fwhm / std::sqrt(8.0 * std::log(2.0));
            } else {
                diffusion_fwhm = shape.intrinsic_fwhm;
                sweep_amplitude_ = 0.5 * shape.deviation;
                sweep_period_ = 1.0 / shape.mod_rate;
            }
        },
        spec.lineshape);
    // The process runs extra_delay behind the sample clock.
    const double process_time = t_start - spec.extra_delay;
    detuning_cycles_ = fractional(spec.detuning * process_time);
    if (sweep_period_ > 0.0) {
        sweep_time_ = process_time - sweep_period_ * std::floor(process_time / sweep_period_);
    }
    // Per-step variance 2*pi*fwhm*dt gives <exp(i dphi)> = exp(-pi*fwhm*|tau|).
    diffusion_sigma_ = std::sqrt(kTwoPi * diffusion_fwhm * dt);
    random_phase_ = kTwoPi * unit_uniform(rng_);
    if (ou_sigma_ > 0.0) {
        ou_decay_ = std::exp(-dt / kGaussianFrequencyMemory);
        ou_kick_ = ou_sigma_ * std::sqrt(1.0 - ou_decay_ * ou_decay_);
        ou_frequency_ = ou_sigma_ * normal_(rng_);
    }
}

void FieldSynthesizer::generate_phase(std::span<double> out) {
    for (double& phase : out) {
        double cycles = detuning_cycles_;
        if (sweep_period_ > 0.0) {
            cycles += fractional(triangle_integral(sweep_time_, sweep_amplitude_, sweep_period_));
            sweep_time_ += dt_;
            if (sweep_time_ >= sweep_period_) sweep_time_ -= sweep_period_;
        }
        phase = random_phase_ + kTwoPi * cycles;

        detuning_cycles_ += detuning_step_;
        detuning_cycles_ -= std::floor(detuning_cycles_);
        if (diffusion_sigma_ > 0.0) random_phase_ += diffusion_sigma_ * normal_(rng_);
        if (ou_sigma_ > 0.0) {
            random_phase_ += kTwoPi * ou_frequency_ * dt_;
            ou_frequency_ = ou_decay_ * ou_frequency_ + ou_kick_ * normal_(rng_);
        }
        if (random_phase_ > kPi) {
            random_phase_ -= kTwoPi;
        } else if (random_phase_ < -kPi) {
            random_phase_ += kTwoPi;
        }
    }
}

void FieldSynthesizer::generate(std::span<std::complex<double>> out) {
    scratch_.resize(out.size());
    generate_phase(scratch_);
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = {std::cos(scratch_[k]), std::sin(scratch_[k])};
    }
}

FieldStream synthesize_field(const SourceSpec& spec, double duration, double dt,
                             std::uint64_t seed) {
    validate(spec);
    require(dt > 0.0, "dt must be > 0");
    require(duration >= 0.0, "duration must be >= 0");
    const double limit = max_sample_dt(spec, spec);
    require(dt <= limit * (1.0 + 1e-12),
            fmt::format("dt {} s exceeds 1/(50 * spectral extent) = {} s", dt, limit));
    FieldStream stream{dt, 0.0, {}};
    stream.samples.resize(static_cast<std::size_t>(std::llround(duration / dt)));
    FieldSynthesizer synth(spec, dt, 0.0, seed);
    synth.generate(stream.samples);
    return stream;
}

void beamsplit_into(std::span<const std::complex<double>> field_1,
                    std::span<const std::complex<double>> field_2, double mode_overlap,
                    double rate_1, double rate_2, std::span<double> out_a, std::span<double> out_b) {
    if (field_1.size() != field_2.size() || out_a.size() != field_1.size() ||
        out_b.size() != field_1.size()) {
        throw LengthMismatchError("beamsplit inputs and outputs must have equal length");
    }
    const double amp_1 = std::sqrt(mode_overlap * rate_1);
    const double amp_2 = std::sqrt(mode_overlap * rate_2);
    const double incoherent = 0.5 * (1.0 - mode_overlap) * (rate_1 + rate_2);
    for (std::size_t k = 0; k < field_1.size(); ++k) {
        const double x1 = amp_1 * field_1[k].real(), y1 = amp_1 * field_1[k].imag();
        const double x2 = amp_2 * field_2[k].real(), y2 = amp_2 * field_2[k].imag();
        // a1 + i a2 and i a1 + a2
        const double ar = x1 - y2, ai = y1 + x2;
        const double br = x2 - y1, bi = y2 + x1;
        out_a[k] = 0.5 * (ar * ar + ai * ai) + incoherent;
        out_b[k] = 0.5 * (br * br + bi * bi) + incoherent;
    }
}

void beamsplit_phases_into(std::span<const double> phase_1, std::span<const double> phase_2,
                           double mode_overlap, double rate_1, double rate_2,
                           std::span<double> out_a, std::span<double> out_b) {
    if (phase_1.size() != phase_2.size() || out_a.size() != phase_1.size() ||
        out_b.size() != phase_1.size()) {
        throw LengthMismatchError("beamsplit inputs and outputs must have equal length");
    }
    const double mean = 0.5 * (rate_1 + rate_2);
    const double beat = mode_overlap * std::sqrt(rate_1 * rate_2);
    for (std::size_t k = 0; k < phase_1.size(); ++k) {
        const double swing = beat * std::sin(phase_2[k] - phase_1[k]);
        out_a[k] = mean - swing;
        out_b[k] = mean + swing;
    }
}

IntensityPair beamsplit(const FieldStream& field_1, const FieldStream& field_2, double mode_overlap,
                        double rate_1, double rate_2) {
    if (field_1.samples.size() != field_2.samples.size()) {
        throw LengthMismatchError(fmt::format("field lengths differ: {} vs {}",
                                              field_1.samples.size(), field_2.samples.size()));
    }
    if (field_1.dt != field_2.dt) {
        throw LengthMismatchError(fmt::format("field sample intervals differ: {} vs {}", field_1.dt,
                                              field_2.dt));
    }
    require(mode_overlap >= 0.0 && mode_overlap <= 1.0, "mode_overlap must be in [0, 1]");
    require(rate_1 >= 0.0 && rate_2 >= 0.0, "input rates must be >= 0");
    IntensityPair out;
    out.a = {field_1.dt, field_1.t0, std::vector<double>(field_1.samples.size())};
    out.b = {field_1.dt, field_1.t0, std::vector<double>(field_1.samples.size())};
    beamsplit_into(field_1.samples, field_2.samples, mode_overlap, rate_1, rate_2, out.a.rate,
                   out.b.rate);
    return out;
}

DetectorSampler::DetectorSampler(const DetectorSpec& spec, std::uint64_t seed)
    : spec_(spec), rng_(seed) {
    remaining_ = exponential_(rng_);
}

void DetectorSampler::consume(std::span<const double> rate, double t0, double dt,
                              std::vector<TimestampPs>& raw_out) {
    const double gain = spec_.efficiency * dt;
    const double dark = spec_.dark_rate * dt;
    for (std::size_t k = 0; k < rate.size(); ++k) {
        remaining_ -= gain * rate[k] + dark;
        while (remaining_ <= 0.0) {
            const double u = unit_uniform(rng_);
            double t = t0 + (static_cast<double>(k) + u) * dt;
            if (spec_.jitter_sigma > 0.0) t += spec_.jitter_sigma * normal_(rng_);
            raw_out.push_back(std::llround(t * 1e12));
            remaining_ += exponential_(rng_);
        }
    }
}

void finalize_events(std::vector<TimestampPs>& events, double dead_time) {
    std::sort(events.begin(), events.end());
    const TimestampPs dead_ps = std::llround(dead_time * 1e12);
    std::size_t kept = 0;
    bool have_last = false;
    TimestampPs last = 0;
    for (const TimestampPs t : events) {
        if (t < 0) continue;
        if (have_last && (t - last < dead_ps || t == last)) continue;
        events[kept++] = t;
        last = t;
        have_last = true;
    }
    events.resize(kept);
}

std::vector<TimestampPs> detect(const IntensityStream& intensity, const DetectorSpec& spec,
                                std::uint64_t seed) {
    validate(spec);
    if (std::any_of(intensity.rate.begin(), intensity.rate.end(), [](double r) { return r < 0.0; })) {
        throw ConfigError("intensity must be non-negative");
    }
    std::vector<TimestampPs> events;
    DetectorSampler sampler(spec, seed);
    sampler.consume(intensity.rate, intensity.t0, intensity.dt, events);
    finalize_events(events, spec.dead_time);
    return events;
}

namespace {

struct SegmentEvents {
    std::vector<TimestampPs> a;
    std::vector<TimestampPs> b;
};

// Nonzero extra_delay selects a distinct field stream.
std::uint64_t field_seed(const SourceSpec& spec, std::uint64_t stream, std::uint64_t segment) {
    const auto delay_ps = static_cast<std::uint64_t>(std::llround(spec.extra_delay * 1e12));
    const std::uint64_t base = delay_ps == 0 ? spec.rng_seed : derive_seed(spec.rng_seed, kStreamDelay, delay_ps);
    return derive_seed(base, stream, segment);
}

SegmentEvents simulate_segment(const ExperimentConfig& config, double rate_1, double rate_2,
                               std::int64_t first_sample, std::int64_t sample_count,
                               std::uint64_t segment_index) {
    const double dt = config.sample_dt;
    const double t_start = static_cast<double>(first_sample) * dt;
    FieldSynthesizer field_1(config.source_1, dt, t_start,
                             field_seed(config.source_1, kStreamField1, segment_index));
    FieldSynthesizer field_2(config.source_2, dt, t_start,
                             field_seed(config.source_2, kStreamField2, segment_index));
    DetectorSampler detector_a(config.detector_a,
                               derive_seed(config.detector_seed, kStreamDetectorA, segment_index));
    DetectorSampler detector_b(config.detector_b,
                               derive_seed(config.detector_seed, kStreamDetectorB, segment_index));

    std::vector<double> p1(kChunk), p2(kChunk);
    std::vector<double> ia(kChunk), ib(kChunk);
    SegmentEvents out;
    for (std::int64_t done = 0; done < sample_count;) {
        const auto n = static_cast<std::size_t>(
            std::min<std::int64_t>(static_cast<std::int64_t>(kChunk), sample_count - done));
        const std::span<double> s1(p1.data(), n), s2(p2.data(), n);
        const std::span<double> sa(ia.data(), n), sb(ib.data(), n);
        field_1.generate_phase(s1);
        field_2.generate_phase(s2);
        beamsplit_phases_into(s1, s2, config.mode_overlap, rate_1, rate_2, sa, sb);
        const double t0 = static_cast<double>(first_sample + done) * dt;
        detector_a.consume(sa, t0, dt, out.a);
        detector_b.consume(sb, t0, dt, out.b);
        done += static_cast<std::int64_t>(n);
    }
    return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
    validate(config);
    RunResult result;
    auto& meta = result.metadata;
    const auto [rate_1, rate_2] = input_rates(config);
    meta.duration = config.duration;
    meta.input_rate_1 = rate_1;
    meta.input_rate_2 = rate_2;
    meta.expected_visibility = expected_visibility(config);
    const std::int64_t total = std::llround(config.duration / config.sample_dt);
    meta.samples = total;
    if (total == 0) return result;

    const std::int64_t per_segment =
        std::max<std::int64_t>(1, std::llround(config.segment_duration / config.sample_dt));
    const auto segment_count = static_cast<std::size_t>((total + per_segment - 1) / per_segment);
    meta.segments = segment_count;

    std::vector<SegmentEvents> segments(segment_count);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t s = next++; s < segment_count; s = next++) {
            const std::int64_t first = static_cast<std::int64_t>(s) * per_segment;
            const std::int64_t count = std::min(per_segment, total - first);
            segments[s] = simulate_segment(config, rate_1, rate_2, first, count, s);
        }
    };
    const unsigned threads =
        std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(segment_count)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    }

    for (auto& seg : segments) {
        result.events_a.insert(result.events_a.end(), seg.a.begin(), seg.a.end());
        result.events_b.insert(result.events_b.end(), seg.b.begin(), seg.b.end());
        seg = {};
    }
    finalize_events(result.events_a, config.detector_a.dead_time);
    finalize_events(result.events_b, config.detector_b.dead_time);
    meta.singles_rate_a = static_cast<double>(result.events_a.size()) / config.duration;
    meta.singles_rate_b = static_cast<double>(result.events_b.size()) / config.duration;
    return result;
}

}  // namespace cwhom::lasersim
