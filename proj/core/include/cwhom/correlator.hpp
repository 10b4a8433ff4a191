#pragma once

// TCSPC-style multi-stop coincidence histogramming of two photon-event
// streams, with wing normalization and segment merging.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cwhom/lasersim.hpp"

namespace cwhom::correlator {

using lasersim::TimestampPs;

/// Symmetric histogram of dT = t_B - t_A with an odd bin count and a zero
/// bin centred on 0. Bins are half-open [c - w/2, c + w/2).
class HistogramSpec {
public:
    /// Throws ConfigError unless bin_width > 0, both are whole picoseconds and
    /// window is an exact multiple of bin_width.
    explicit HistogramSpec(double bin_width = 0.5e-9, double window = 2e-6);

    double bin_width() const noexcept { return static_cast<double>(bin_ps_) * 1e-12; }
    double window() const noexcept { return static_cast<double>(window_ps_) * 1e-12; }
    std::int64_t bin_ps() const noexcept { return bin_ps_; }
    std::int64_t window_ps() const noexcept { return window_ps_; }
    std::int64_t half_bins() const noexcept { return window_ps_ / bin_ps_; }
    std::size_t bin_count() const noexcept { return static_cast<std::size_t>(2 * half_bins() + 1); }

    /// Bin index (0-based) of a delay in picoseconds; caller ensures |dt| <= window.
    std::size_t bin_of(std::int64_t delta_ps) const noexcept;
    double bin_center(std::size_t index) const noexcept;

    friend bool operator==(const HistogramSpec&, const HistogramSpec&) = default;

private:
    std::int64_t bin_ps_;
    std::int64_t window_ps_;
};

struct CoincidenceHistogram {
    HistogramSpec spec;
    std::vector<std::uint64_t> counts;
    std::uint64_t singles_a = 0;
    std::uint64_t singles_b = 0;
    double duration = 0.0;

    std::uint64_t total() const noexcept;
    friend bool operator==(const CoincidenceHistogram&, const CoincidenceHistogram&) = default;
};

CoincidenceHistogram empty_histogram(const HistogramSpec& spec);

/// All pairs with |t_b - t_a| <= window, two-pointer sliding window.
/// Throws UnsortedInputError naming the stream ("A" or "B") and the first
/// index that is not strictly greater than its predecessor.
CoincidenceHistogram correlate(std::span<const TimestampPs> events_a,
                               std::span<const TimestampPs> events_b, const HistogramSpec& spec,
                               double duration = 0.0);

/// Splits [0, duration) into `segments` equal time slices, correlates each
/// independently (optionally on several threads) and merges. Pairs that
/// straddle a slice boundary are dropped.
CoincidenceHistogram correlate_segmented(std::span<const TimestampPs> events_a,
                                         std::span<const TimestampPs> events_b,
                                         const HistogramSpec& spec, double duration,
                                         std::size_t segments, unsigned threads = 1);

/// Element-wise sum. Throws SpecMismatchError for differing specs.
CoincidenceHistogram merge(const CoincidenceHistogram& h1, const CoincidenceHistogram& h2);

struct WingRange {
    double inner;  ///< s, |dT| lower edge
    double outer;  ///< s, |dT| upper edge
};

/// Default wings: |dT| in [window/2, window].
WingRange default_wings(const HistogramSpec& spec);

struct NormalizedFringe {
    double bin_width = 0.0;
    std::vector<double> centers;  ///< s
    std::vector<double> counts;
    std::vector<double> values;
    std::vector<double> errors;
    double baseline = 0.0;  ///< counts per bin in the wings
};

/// values = counts / baseline, errors = sqrt(counts) / baseline, with the
/// baseline taken as the mean of the wing bins on both sides. The two
/// outermost bins only partly overlap [-window, window] and are divided by
/// their covered fraction as well. Throws
/// ConfigError for wings outside [window/2, window] or with fewer than 100
/// bins, NormalizationError for a zero baseline.
NormalizedFringe normalize(const CoincidenceHistogram& h, const WingRange& wing);

struct SinglesStats {
    double rate = 0.0;       ///< cps
    double min_gap = 0.0;    ///< s; 0 when fewer than two events
    std::size_t dead_time_violations = 0;
};

SinglesStats singles_stats(std::span<const TimestampPs> events, const lasersim::DetectorSpec& spec,
                           double duration);

/// CSV with header bin_center_ns,counts,normalized,error.
std::string histogram_to_csv(const CoincidenceHistogram& h, const NormalizedFringe& fringe);

/// Parses a CSV produced by histogram_to_csv (or any file with the same
/// columns) back into a fringe. Throws FormatError.
NormalizedFringe fringe_from_csv(const std::string& text);

}  // namespace cwhom::correlator
