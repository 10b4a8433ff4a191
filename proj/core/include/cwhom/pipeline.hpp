#pragma once

// Stage driver: simulate -> correlate -> fit, and beat-spectrum runs.

#include <optional>
#include <string>
#include <vector>

#include "cwhom/analysis.hpp"
#include "cwhom/config.hpp"
#include "cwhom/correlator.hpp"
#include "cwhom/lasersim.hpp"

namespace cwhom::pipeline {

struct FitOutcome {
    analysis::HomFit primary;
    std::optional<analysis::HomFit> effective;
    std::optional<std::string> effective_error;
};

struct PipelineResult {
    std::optional<lasersim::RunResult> run;
    std::optional<correlator::CoincidenceHistogram> histogram;
    std::optional<correlator::NormalizedFringe> fringe;
    std::optional<FitOutcome> fit;
    /// Set when the primary fit did not converge; earlier stages still hold.
    std::optional<std::string> fit_error;
};

/// Runs the configured stages. Configuration problems throw ConfigError;
/// a failed primary fit is recorded in fit_error.
PipelineResult execute(const config::RunConfig& config);

/// Primary fit plus, when enabled, the effective-lorentzian width fit.
FitOutcome fit_fringe(const correlator::NormalizedFringe& fringe, const config::RunConfig& config);

struct BeatResult {
    std::string label;
    analysis::PsdEstimate psd;
    std::optional<analysis::PsdWidth> width;
    std::optional<std::string> width_error;
};

/// Beat spectra of each source against a zero-linewidth reference at zero
/// detuning, and of source 1 against source 2.
std::vector<BeatResult> beat_spectra(const config::RunConfig& config);

}  // namespace cwhom::pipeline
