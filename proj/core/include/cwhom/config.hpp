#pragma once

// TOML run configuration, reproduction presets and command-line overrides.
//
// Sections mirror the library types one to one:
//   [experiment]  duration, sample_dt, mode_overlap, segment_duration,
//                 detector_seed, threads
//   [source_1] / [source_2]  detuning, mean_rate, extra_delay, rng_seed
//   [source_N.lineshape]  kind = lorentzian | rectangular | gaussian |
//                 fm-triangle, with fwhm / width / intrinsic_fwhm, mod_rate,
//                 deviation
//   [detector_a] / [detector_b]  efficiency, dead_time, dark_rate, jitter_sigma
//   [histogram]   bin_width, window, wing_inner, wing_outer
//   [fit]         gamma_form, fit_delta_omega, delta_omega, fit_baseline,
//                 signed_gamma, effective_fit
//   [stages]      run = ["simulate", "correlate", "fit"], events, fringe,
//                 event_format = binary | csv
//   [beat]        duration, segment_length, overlap

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cwhom/analysis.hpp"
#include "cwhom/correlator.hpp"
#include "cwhom/lasersim.hpp"

namespace cwhom::config {

enum class Stage { Simulate, Correlate, Fit };

struct FitSettings {
    analysis::GammaForm form = analysis::GammaForm::Physical;
    bool fit_delta_omega = false;
    /// rad/s; fixed value, or start value when free. Absent: taken from the
    /// source detunings when fixed, auto-initialized when free.
    std::optional<double> delta_omega;
    bool fit_baseline = true;
    bool signed_gamma = false;
    /// Also fit the effective-lorentzian form for the width convention.
    bool effective_fit = true;
};

struct BeatSettings {
    double duration = 0.005;  ///< s of synthesized field
    std::size_t segment_length = 16384;
    double overlap = 0.5;
};

struct RunConfig {
    lasersim::ExperimentConfig experiment;
    correlator::HistogramSpec histogram;
    std::optional<correlator::WingRange> wings;
    FitSettings fit;
    BeatSettings beat;
    std::vector<Stage> stages{Stage::Simulate, Stage::Correlate, Stage::Fit};
    std::optional<std::filesystem::path> events_input;  ///< correlate-only input
    std::optional<std::filesystem::path> fringe_input;  ///< fit-only input
    bool events_csv = false;

    bool runs(Stage stage) const;
    correlator::WingRange wing_range() const;
};

/// Parses and validates TOML text. Relative input paths resolve against
/// `base_dir`. Throws ConfigError naming the offending field.
RunConfig parse_config(const std::string& toml_text,
                       const std::filesystem::path& base_dir = {},
                       const std::vector<std::string>& overrides = {});

RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {});

/// Canonical TOML rendering of a config (round-trips through parse_config).
std::string to_toml(const RunConfig& config);

std::vector<std::string> preset_names();
/// TOML text of a named preset. Throws ConfigError for unknown names.
std::string preset_toml(const std::string& name);
RunConfig preset_config(const std::string& name, const std::vector<std::string>& overrides = {});

/// Fit model implied by the settings and the configured sources.
analysis::FitModel fit_model(const RunConfig& config);
analysis::FitModel effective_model(const RunConfig& config);

/// Seeds every random stream from one base value.
void apply_seed(RunConfig& config, std::uint64_t seed);

std::string to_string(Stage stage);

}  // namespace cwhom::config
