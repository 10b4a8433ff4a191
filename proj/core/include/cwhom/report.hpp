#pragma once

// Artifact rendering (CSV, JSON, SVG) and run manifests with content hashes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cwhom/analysis.hpp"
#include "cwhom/config.hpp"
#include "cwhom/correlator.hpp"
#include "cwhom/pipeline.hpp"

namespace cwhom::report {

std::string sha256_hex(std::string_view bytes);

struct Artifact {
    std::string name;  ///< file name inside the output directory
    std::string sha256;
    std::size_t bytes = 0;
};

struct RunManifest {
    std::string source;  ///< "preset:<name>" or the config path
    std::vector<std::pair<std::string, std::uint64_t>> seeds;
    std::filesystem::path output_dir;
    std::vector<Artifact> artifacts;
};

std::string manifest_json(const RunManifest& manifest);

/// Parameter table, chi^2, convention flags and width conversions.
std::string fit_json(const pipeline::FitOutcome& fit);
std::string fit_error_json(const std::string& message);

/// Spec, singles, duration and baseline of a histogram.
std::string histogram_json(const correlator::CoincidenceHistogram& h,
                           const correlator::NormalizedFringe& fringe);

/// bin_center_ns,counts,normalized,error[,fit]
std::string fringe_csv(const correlator::NormalizedFringe& fringe,
                       const analysis::HomFit* fit = nullptr);

/// Line plot of the normalized fringe with an optional fit overlay.
std::string fringe_svg(const correlator::NormalizedFringe& fringe,
                       const analysis::HomFit* fit = nullptr);

std::string beat_json(const std::vector<pipeline::BeatResult>& beats);

/// Writes every artifact the result holds into `out_dir` (created if needed)
/// and returns the manifest, which is also written as manifest.json.
RunManifest write_run(const std::filesystem::path& out_dir, const std::string& source,
                      const config::RunConfig& config, const pipeline::PipelineResult& result);

RunManifest write_beat(const std::filesystem::path& out_dir, const std::string& source,
                       const config::RunConfig& config,
                       const std::vector<pipeline::BeatResult>& beats);

}  // namespace cwhom::report
