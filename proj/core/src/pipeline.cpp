#include "cwhom/pipeline.hpp"

#include <cmath>

#include <fmt/format.h>

#include "cwhom/errors.hpp"
#include "cwhom/event_io.hpp"

namespace cwhom::pipeline {
namespace {

BeatResult make_beat(std::string label, const lasersim::FieldStream& f1, const lasersim::FieldStream& f2,
                     const config::BeatSettings& settings) {
    BeatResult r;
    r.label = std::move(label);
    r.psd = analysis::beat_psd(f1, f2, settings.segment_length, settings.overlap);
    try {
        r.width = analysis::psd_width(r.psd);
    } catch (const AmbiguousWidthError& e) {
        r.width_error = e.what();
    }
    return r;
}

}  // namespace

FitOutcome fit_fringe(const correlator::NormalizedFringe& fringe, const config::RunConfig& config) {
    analysis::FitInit init;
    if (config.fit.fit_delta_omega && config.fit.delta_omega) init.delta_omega = *config.fit.delta_omega;
    FitOutcome out{analysis::fit_hom(fringe, config::fit_model(config), init), std::nullopt, std::nullopt};
    if (config.fit.effective_fit && config.fit.form != analysis::GammaForm::EffectiveLorentzian) {
        try {
            out.effective = analysis::fit_hom(fringe, config::effective_model(config), init);
        } catch (const ConvergenceError& e) {
            out.effective_error = e.what();
        }
    } else if (config.fit.form == analysis::GammaForm::EffectiveLorentzian) {
        out.effective = out.primary;
    }
    return out;
}

PipelineResult execute(const config::RunConfig& config) {
    PipelineResult result;
    std::vector<lasersim::TimestampPs> const* events_a = nullptr;
    std::vector<lasersim::TimestampPs> const* events_b = nullptr;
    double duration = config.experiment.duration;
    event_io::EventFile loaded;

    if (config.runs(config::Stage::Simulate)) {
        result.run = lasersim::run_experiment(config.experiment);
        events_a = &result.run->events_a;
        events_b = &result.run->events_b;
    }
    if (config.runs(config::Stage::Correlate)) {
        if (!events_a) {
            try {
                loaded = event_io::read_events(*config.events_input);
            } catch (const FormatError& e) {
                throw ConfigError(fmt::format("stages.events: {}", e.what()));
            }
            events_a = &loaded.events_a;
            events_b = &loaded.events_b;
            duration = static_cast<double>(loaded.duration_ps) * 1e-12;
        }
        result.histogram = correlator::correlate(*events_a, *events_b, config.histogram, duration);
        result.fringe = correlator::normalize(*result.histogram, config.wing_range());
    }
    if (config.runs(config::Stage::Fit)) {
        if (!result.fringe) {
            try {
                result.fringe = correlator::fringe_from_csv(event_io::read_file(*config.fringe_input));
            } catch (const FormatError& e) {
                throw ConfigError(fmt::format("stages.fringe: {}", e.what()));
            }
        }
        try {
            result.fit = fit_fringe(*result.fringe, config);
        } catch (const ConvergenceError& e) {
            result.fit_error = e.what();
        }
    }
    return result;
}

std::vector<BeatResult> beat_spectra(const config::RunConfig& config) {
    const auto& e = config.experiment;
    const double dt = e.sample_dt;
    const auto samples = static_cast<std::size_t>(std::llround(config.beat.duration / dt));
    lasersim::validate(e.source_1);
    lasersim::validate(e.source_2);
    if (dt > lasersim::max_sample_dt(e.source_1, e.source_2) * (1.0 + 1e-12)) {
        throw ConfigError(fmt::format("experiment.sample_dt: {} s is too coarse for these sources", dt));
    }
    const double span = static_cast<double>(samples) * dt;
    const auto field_1 = lasersim::synthesize_field(e.source_1, span, dt, e.source_1.rng_seed);
    const auto field_2 = lasersim::synthesize_field(e.source_2, span, dt, e.source_2.rng_seed);
    const auto reference = analysis::monochromatic_field(field_1.samples.size(), dt);
    std::vector<BeatResult> out;
    out.push_back(make_beat("source_1", field_1, reference, config.beat));
    out.push_back(make_beat("source_2", field_2, reference, config.beat));
    out.push_back(make_beat("source_1_vs_source_2", field_1, field_2, config.beat));
    return out;
}

}  // namespace cwhom::pipeline
