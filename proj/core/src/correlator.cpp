#include "cwhom/correlator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "cwhom/errors.hpp"

namespace cwhom::correlator {
namespace {

std::int64_t to_whole_ps(double seconds, const char* name) {
    const double ps = seconds * 1e12;
    const auto rounded = std::llround(ps);
    if (!(seconds > 0.0) || std::abs(ps - static_cast<double>(rounded)) > 1e-6 * std::max(1.0, ps)) {
        throw ConfigError(
            fmt::format("histogram {} must be a positive whole number of picoseconds, got {} s",
                        name, seconds));
    }
    return rounded;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    const std::int64_t q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

// Fraction of a bin's delay range that lies inside [-window, window].
double exposure(const HistogramSpec& spec, std::size_t index) {
    const std::int64_t bw = spec.bin_ps();
    const std::int64_t w = spec.window_ps();
    const std::int64_t center = (static_cast<std::int64_t>(index) - spec.half_bins()) * bw;
    const std::int64_t lo = std::max(ceil_div(2 * center - bw, 2), -w);
    const std::int64_t hi = std::min(ceil_div(2 * center + bw, 2), w + 1);
    return static_cast<double>(std::max<std::int64_t>(0, hi - lo)) / static_cast<double>(bw);
}

void require_strictly_increasing(std::span<const TimestampPs> events, const char* name) {
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (events[i] <= events[i - 1]) throw UnsortedInputError(name, i);
    }
}

void accumulate_pairs(std::span<const TimestampPs> a, std::span<const TimestampPs> b,
                      const HistogramSpec& spec, std::vector<std::uint64_t>& counts) {
    const std::int64_t window = spec.window_ps();
    std::size_t lo = 0;
    for (const TimestampPs ta : a) {
        while (lo < b.size() && b[lo] < ta - window) ++lo;
        for (std::size_t j = lo; j < b.size() && b[j] <= ta + window; ++j) {
            ++counts[spec.bin_of(b[j] - ta)];
        }
    }
}

}  // namespace

HistogramSpec::HistogramSpec(double bin_width, double window)
    : bin_ps_(to_whole_ps(bin_width, "bin_width")), window_ps_(to_whole_ps(window, "window")) {
    if (window_ps_ % bin_ps_ != 0) {
        throw ConfigError(fmt::format(
            "histogram.window ({} s) is not an exact multiple of histogram.bin_width ({} s)", window,
            bin_width));
    }
}

std::size_t HistogramSpec::bin_of(std::int64_t delta_ps) const noexcept {
    return static_cast<std::size_t>(floor_div(2 * delta_ps + bin_ps_, 2 * bin_ps_) + half_bins());
}

double HistogramSpec::bin_center(std::size_t index) const noexcept {
    return static_cast<double>((static_cast<std::int64_t>(index) - half_bins()) * bin_ps_) * 1e-12;
}

std::uint64_t CoincidenceHistogram::total() const noexcept {
    std::uint64_t sum = 0;
    for (const auto c : counts) sum += c;
    return sum;
}

CoincidenceHistogram empty_histogram(const HistogramSpec& spec) {
    return CoincidenceHistogram{spec, std::vector<std::uint64_t>(spec.bin_count(), 0), 0, 0, 0.0};
}

CoincidenceHistogram correlate(std::span<const TimestampPs> events_a,
                               std::span<const TimestampPs> events_b, const HistogramSpec& spec,
                               double duration) {
    require_strictly_increasing(events_a, "A");
    require_strictly_increasing(events_b, "B");
    CoincidenceHistogram h = empty_histogram(spec);
    h.singles_a = events_a.size();
    h.singles_b = events_b.size();
    h.duration = duration;
    accumulate_pairs(events_a, events_b, spec, h.counts);
    return h;
}

CoincidenceHistogram correlate_segmented(std::span<const TimestampPs> events_a,
                                         std::span<const TimestampPs> events_b,
                                         const HistogramSpec& spec, double duration,
                                         std::size_t segments, unsigned threads) {
    require_strictly_increasing(events_a, "A");
    require_strictly_increasing(events_b, "B");
    if (segments == 0) throw ConfigError("segment count must be positive");
    TimestampPs end_ps = std::llround(duration * 1e12);
    if (!events_a.empty()) end_ps = std::max(end_ps, events_a.back() + 1);
    if (!events_b.empty()) end_ps = std::max(end_ps, events_b.back() + 1);
    const TimestampPs slice = std::max<TimestampPs>(1, (end_ps + static_cast<TimestampPs>(segments) - 1) /
                                                           static_cast<TimestampPs>(segments));

    auto range = [slice](std::span<const TimestampPs> s, std::size_t k) {
        const TimestampPs lo = static_cast<TimestampPs>(k) * slice;
        const auto first = std::lower_bound(s.begin(), s.end(), lo);
        const auto last = std::lower_bound(first, s.end(), lo + slice);
        return s.subspan(static_cast<std::size_t>(first - s.begin()),
                         static_cast<std::size_t>(last - first));
    };

    std::vector<CoincidenceHistogram> partial(segments, empty_histogram(spec));
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t k = next++; k < segments; k = next++) {
            accumulate_pairs(range(events_a, k), range(events_b, k), spec, partial[k].counts);
        }
    };
    const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(segments)));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    }

    CoincidenceHistogram h = empty_histogram(spec);
    for (const auto& p : partial) h = merge(h, p);
    h.singles_a = events_a.size();
    h.singles_b = events_b.size();
    h.duration = duration;
    return h;
}

CoincidenceHistogram merge(const CoincidenceHistogram& h1, const CoincidenceHistogram& h2) {
    if (!(h1.spec == h2.spec) || h1.counts.size() != h2.counts.size()) {
        throw SpecMismatchError(fmt::format(
            "cannot merge histograms with different specs (bin {} ps / window {} ps vs {} ps / {} ps)",
            h1.spec.bin_ps(), h1.spec.window_ps(), h2.spec.bin_ps(), h2.spec.window_ps()));
    }
    CoincidenceHistogram out = h1;
    for (std::size_t i = 0; i < out.counts.size(); ++i) out.counts[i] += h2.counts[i];
    out.singles_a += h2.singles_a;
    out.singles_b += h2.singles_b;
    out.duration += h2.duration;
    return out;
}

WingRange default_wings(const HistogramSpec& spec) {
    return {0.5 * spec.window(), spec.window()};
}

NormalizedFringe normalize(const CoincidenceHistogram& h, const WingRange& wing) {
    const double window = h.spec.window();
    const double slack = 1e-3 * h.spec.bin_width();
    if (!(wing.inner >= 0.5 * window - slack && wing.outer <= window + slack &&
          wing.inner < wing.outer)) {
        throw ConfigError(fmt::format("wing [{}, {}] s must lie within [window/2, window] = [{}, {}] s",
                                      wing.inner, wing.outer, 0.5 * window, window));
    }
    NormalizedFringe f;
    f.bin_width = h.spec.bin_width();
    const std::size_t n = h.counts.size();
    f.centers.resize(n);
    f.counts.resize(n);
    std::vector<double> cover(n);
    double wing_sum = 0.0;
    std::size_t wing_bins = 0;
    for (std::size_t i = 0; i < n; ++i) {
        f.centers[i] = h.spec.bin_center(i);
        f.counts[i] = static_cast<double>(h.counts[i]);
        cover[i] = exposure(h.spec, i);
        const double a = std::abs(f.centers[i]);
        if (a >= wing.inner - slack && a <= wing.outer + slack) {
            wing_sum += f.counts[i] / cover[i];
            ++wing_bins;
        }
    }
    if (wing_bins < 100) {
        throw ConfigError(fmt::format("wing contains {} bins, at least 100 required", wing_bins));
    }
    f.baseline = wing_sum / static_cast<double>(wing_bins);
    if (!(f.baseline > 0.0)) throw NormalizationError("wing baseline is zero");
    f.values.resize(n);
    f.errors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        f.values[i] = f.counts[i] / (f.baseline * cover[i]);
        f.errors[i] = std::sqrt(f.counts[i]) / (f.baseline * cover[i]);
    }
    return f;
}

SinglesStats singles_stats(std::span<const TimestampPs> events, const lasersim::DetectorSpec& spec,
                           double duration) {
    SinglesStats s;
    if (events.empty()) return s;
    s.rate = duration > 0.0 ? static_cast<double>(events.size()) / duration : 0.0;
    const TimestampPs dead_ps = std::llround(spec.dead_time * 1e12);
    TimestampPs min_gap = 0;
    for (std::size_t i = 1; i < events.size(); ++i) {
        const TimestampPs gap = events[i] - events[i - 1];
        if (i == 1 || gap < min_gap) min_gap = gap;
        if (gap < dead_ps) ++s.dead_time_violations;
    }
    s.min_gap = static_cast<double>(min_gap) * 1e-12;
    return s;
}

std::string histogram_to_csv(const CoincidenceHistogram& h, const NormalizedFringe& fringe) {
    if (fringe.values.size() != h.counts.size()) {
        throw LengthMismatchError("fringe and histogram have different bin counts");
    }
    std::string csv = "bin_center_ns,counts,normalized,error\n";
    csv.reserve(csv.size() + h.counts.size() * 40);
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        csv += fmt::format("{:.4f},{},{:.9g},{:.9g}\n", h.spec.bin_center(i) * 1e9, h.counts[i],
                           fringe.values[i], fringe.errors[i]);
    }
    return csv;
}

NormalizedFringe fringe_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("bin_center_ns", 0) != 0) {
        throw FormatError("fringe CSV must start with header bin_center_ns,counts,normalized,error");
    }
    NormalizedFringe f;
    double counts_sum = 0.0;
    double values_sum = 0.0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        double c_ns = 0, counts = 0, value = 0, error = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &c_ns, &counts, &value, &error) != 4) {
            throw FormatError(fmt::format("fringe CSV line {} is malformed: '{}'", line_no, line));
        }
        f.centers.push_back(c_ns * 1e-9);
        f.counts.push_back(counts);
        f.values.push_back(value);
        f.errors.push_back(error);
        counts_sum += counts;
        values_sum += value;
    }
    if (f.centers.size() < 2) throw FormatError("fringe CSV has fewer than two bins");
    f.bin_width = f.centers[1] - f.centers[0];
    f.baseline = values_sum > 0.0 ? counts_sum / values_sum : 0.0;
    return f;
}

}  // namespace cwhom::correlator
