#include <algorithm>
#include <cmath>
#include <memory>

#include <fftw3.h>
#include <fmt/format.h>

#include "cwhom/analysis.hpp"
#include "cwhom/errors.hpp"

namespace cwhom::analysis {
namespace {

constexpr std::size_t kMinSegments = 20;
// Gaps of this many grid points or fewer between half-maximum regions are
// estimator noise, not separate lobes.
constexpr std::size_t kLobeGapTolerance = 2;
// Broad lobes are re-measured on a moving average spanning about this
// fraction of their first-pass FWHM.
constexpr double kSmoothingFraction = 0.05;

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};

struct Span {
    std::size_t first;
    std::size_t last;
};

// Contiguous region around the peak where density >= level, bridging short
// dips. Sets `extra_lobes` when another region above the level exists.
Span region_above(const std::vector<double>& y, std::size_t peak, double level, bool& extra_lobes) {
    auto extend = [&](std::size_t i, int dir) {
        std::size_t edge = i;
        std::size_t gap = 0;
        for (auto j = static_cast<std::ptrdiff_t>(i) + dir;
             j >= 0 && j < static_cast<std::ptrdiff_t>(y.size()); j += dir) {
            if (y[static_cast<std::size_t>(j)] >= level) {
                edge = static_cast<std::size_t>(j);
                gap = 0;
            } else if (++gap > kLobeGapTolerance) {
                break;
            }
        }
        return edge;
    };
    const Span s{extend(peak, -1), extend(peak, +1)};
    extra_lobes = false;
    for (std::size_t j = 0; j < y.size(); ++j) {
        if ((j < s.first || j > s.last) && y[j] >= level) extra_lobes = true;
    }
    return s;
}

double crossing(const std::vector<double>& f, const std::vector<double>& y, std::size_t inside,
                std::size_t outside, double level) {
    const double y0 = y[inside];
    const double y1 = y[outside];
    if (y0 == y1) return f[inside];
    return f[inside] + (level - y0) / (y1 - y0) * (f[outside] - f[inside]);
}

double width_at(const PsdEstimate& psd, std::size_t peak, double level, bool& extra_lobes) {
    const auto& y = psd.density;
    const Span s = region_above(y, peak, level, extra_lobes);
    const double lo = s.first > 0 ? crossing(psd.frequency, y, s.first, s.first - 1, level)
                                  : psd.frequency.front();
    const double hi = s.last + 1 < y.size() ? crossing(psd.frequency, y, s.last, s.last + 1, level)
                                            : psd.frequency.back();
    return hi - lo;
}

}  // namespace

PsdEstimate beat_psd(const lasersim::FieldStream& field_1, const lasersim::FieldStream& field_2,
                     std::size_t segment_length, double overlap) {
    const auto& x1 = field_1.samples;
    const auto& x2 = field_2.samples;
    if (x1.size() != x2.size()) {
        throw LengthMismatchError(
            fmt::format("beat streams differ in length ({} vs {} samples)", x1.size(), x2.size()));
    }
    if (field_1.dt != field_2.dt || !(field_1.dt > 0.0)) {
        throw LengthMismatchError(
            fmt::format("beat streams differ in sample spacing ({} vs {} s)", field_1.dt, field_2.dt));
    }
    if (segment_length < 2) throw ConfigError("beat segment_length must be at least 2 samples");
    if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("beat overlap must lie in [0, 1)");
    const auto hop = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(static_cast<double>(segment_length) * (1.0 - overlap))));
    const std::size_t segments = x1.size() >= segment_length ? (x1.size() - segment_length) / hop + 1 : 0;
    if (segments < kMinSegments) {
        throw TooFewSegmentsError(fmt::format("{} samples give {} segments of {}; at least {} required",
                                              x1.size(), segments, segment_length, kMinSegments));
    }

    const std::size_t n = segment_length;
    std::vector<double> window(n);
    double window_power = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        window[k] = 0.5 - 0.5 * std::cos(2.0 * spectral::kPi * static_cast<double>(k) / static_cast<double>(n));
        window_power += window[k] * window[k];
    }

    std::unique_ptr<fftw_complex, FftwFree> buffer(
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
    const fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), buffer.get(), buffer.get(),
                                            FFTW_FORWARD, FFTW_ESTIMATE);
    std::vector<double> accum(n, 0.0);
    for (std::size_t s = 0; s < segments; ++s) {
        const std::size_t offset = s * hop;
        for (std::size_t k = 0; k < n; ++k) {
            const std::complex<double> beat = x1[offset + k] * std::conj(x2[offset + k]);
            buffer.get()[k][0] = window[k] * beat.real();
            buffer.get()[k][1] = window[k] * beat.imag();
        }
        fftw_execute(plan);
        for (std::size_t k = 0; k < n; ++k) {
            accum[k] += buffer.get()[k][0] * buffer.get()[k][0] + buffer.get()[k][1] * buffer.get()[k][1];
        }
    }
    fftw_destroy_plan(plan);

    const double dt = field_1.dt;
    PsdEstimate psd;
    psd.df = 1.0 / (static_cast<double>(n) * dt);
    psd.segments = segments;
    psd.frequency.resize(n);
    psd.density.resize(n);
    const double scale = dt / (window_power * static_cast<double>(segments));
    const std::size_t half = n / 2;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = (j + n - half) % n;  // fftshift
        const auto index = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(half);
        psd.frequency[j] = static_cast<double>(index) * psd.df;
        psd.density[j] = accum[k] * scale;
    }
    return psd;
}

lasersim::FieldStream monochromatic_field(std::size_t samples, double dt, double detuning) {
    lasersim::FieldStream f;
    f.dt = dt;
    f.samples.resize(samples);
    for (std::size_t k = 0; k < samples; ++k) {
        const double cycles = detuning * dt * static_cast<double>(k);
        f.samples[k] = std::polar(1.0, 2.0 * spectral::kPi * (cycles - std::floor(cycles)));
    }
    return f;
}

double psd_area(const PsdEstimate& psd) {
    double sum = 0.0;
    for (const double d : psd.density) sum += d;
    return sum * psd.df;
}

namespace {

PsdWidth measure(const PsdEstimate& psd) {
    const auto peak = static_cast<std::size_t>(
        std::max_element(psd.density.begin(), psd.density.end()) - psd.density.begin());
    const double top = psd.density[peak];
    if (!(top > 0.0)) throw AmbiguousWidthError("PSD is identically zero");
    bool extra = false;
    PsdWidth w;
    w.peak_frequency = psd.frequency[peak];
    w.fwhm = width_at(psd, peak, 0.5 * top, extra);
    if (extra) throw AmbiguousWidthError("PSD has more than one lobe above half maximum");
    bool extra_tenth = false;
    const double tenth = width_at(psd, peak, 0.1 * top, extra_tenth);
    w.shape_factor = tenth > 0.0 ? w.fwhm / tenth : 0.0;
    return w;
}

}  // namespace

PsdWidth psd_width(const PsdEstimate& psd) {
    if (psd.density.size() < 3 || psd.density.size() != psd.frequency.size()) {
        throw ConfigError("PSD needs at least three grid points");
    }
    const PsdWidth first = measure(psd);
    const auto half = static_cast<std::size_t>(kSmoothingFraction * first.fwhm / psd.df / 2.0);
    if (half == 0) return first;
    // The raw maximum sits on a noise spike; averaging removes that bias.
    PsdEstimate smooth = psd;
    const std::size_t n = psd.density.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        double sum = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) sum += psd.density[j];
        smooth.density[i] = sum / static_cast<double>(hi - lo + 1);
    }
    return measure(smooth);
}

std::string psd_to_csv(const PsdEstimate& psd) {
    std::string csv = "freq_Hz,density\n";
    for (std::size_t i = 0; i < psd.frequency.size(); ++i) {
        csv += fmt::format("{:.6f},{:.9g}\n", psd.frequency[i], psd.density[i]);
    }
    return csv;
}

}  // namespace cwhom::analysis
