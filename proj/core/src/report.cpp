#include "cwhom/report.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "cwhom/errors.hpp"
#include "cwhom/event_io.hpp"

namespace cwhom::report {
namespace {

using nlohmann::ordered_json;
using spectral::kPi;

ordered_json fit_object(const analysis::HomFit& fit) {
    ordered_json j;
    j["gamma_form"] = analysis::to_string(fit.model.form);
    j["gamma_sign"] = fit.model.sign == spectral::CoherenceSign::Signed ? "signed" : "envelope";
    auto table = [](const std::vector<analysis::ParameterEstimate>& ps) {
        ordered_json arr = ordered_json::array();
        for (const auto& p : ps) arr.push_back({{"name", p.name}, {"value", p.value}, {"sigma", p.sigma}});
        return arr;
    };
    j["parameters"] = table(fit.parameters);
    j["fixed"] = table(fit.fixed);
    if (fit.has("delta_omega")) {
        j["delta_omega_hz"] = fit.value("delta_omega") / (2.0 * kPi);
        j["delta_omega_sign_known"] = fit.delta_omega_sign_known;
    }
    if (const auto inv = fit.inverse_tau_c_hz()) {
        const double tau_c = fit.value("tau_c");
        j["width"] = {{"tau_c_s", tau_c},
                      {"inverse_tau_c_hz", *inv},
                      {"lorentzian_equivalent_hz", 1.0 / (kPi * tau_c)}};
    }
    if (fit.model.form != analysis::GammaForm::EffectiveLorentzian && fit.value("visibility") > 0.0) {
        auto shape = [&](const spectral::Lineshape& l, const char* name) {
            return fit.has(name) ? spectral::with_primary_width(l, fit.value(name)) : l;
        };
        try {
            const spectral::FringeModel m(fit.value("visibility"), shape(*fit.model.lineshape_1, "width_1"),
                                          shape(*fit.model.lineshape_2, "width_2"), 0.0, false, fit.model.sign);
            const auto metrics = spectral::fringe_metrics(m);
            j["fringe_metrics"] = {{"depth", metrics.depth},
                                   {"dip_fwhm_s", metrics.dip_fwhm},
                                   {"coherence_half_width_s", metrics.coherence_half_width},
                                   {"inverse_fwhm_hz", metrics.inverse_fwhm_hz},
                                   {"inverse_coherence_hz", metrics.inverse_coherence_hz},
                                   {"lorentzian_equivalent_hz", metrics.lorentzian_equivalent_hz}};
        } catch (const Error&) {
        }
    }
    j["chi2"] = fit.chi2;
    j["dof"] = fit.dof;
    j["reduced_chi2"] = fit.reduced_chi2;
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["aggregation"] = fit.aggregation;
    j["residuals"] = fit.residuals;
    return j;
}

double nice_step(double span) {
    const double raw = span / 8.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (const double m : {1.0, 2.0, 5.0}) {
        if (raw <= m * mag) return m * mag;
    }
    return 10.0 * mag;
}

Artifact store(const std::filesystem::path& dir, const std::string& name, const std::string& contents) {
    event_io::write_file(dir / name, contents);
    return {name, sha256_hex(contents), contents.size()};
}

RunManifest finish(const std::filesystem::path& out_dir, const std::string& source,
                   const config::RunConfig& config, std::vector<Artifact> artifacts) {
    RunManifest m;
    m.source = source;
    const auto& e = config.experiment;
    m.seeds = {{"source_1", e.source_1.rng_seed}, {"source_2", e.source_2.rng_seed}, {"detector", e.detector_seed}};
    m.output_dir = out_dir;
    m.artifacts = std::move(artifacts);
    event_io::write_file(out_dir / "manifest.json", manifest_json(m));
    return m;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string manifest_json(const RunManifest& manifest) {
    ordered_json j;
    j["source"] = manifest.source;
    ordered_json seeds = ordered_json::object();
    for (const auto& [name, seed] : manifest.seeds) seeds[name] = seed;
    j["seeds"] = seeds;
    j["output_dir"] = manifest.output_dir.generic_string();
    ordered_json arts = ordered_json::array();
    for (const auto& a : manifest.artifacts) arts.push_back({{"name", a.name}, {"sha256", a.sha256}, {"bytes", a.bytes}});
    j["artifacts"] = arts;
    return j.dump(2) + "\n";
}

std::string fit_json(const pipeline::FitOutcome& fit) {
    ordered_json j;
    j["status"] = "converged";
    j["primary"] = fit_object(fit.primary);
    j["effective_lorentzian"] = fit.effective ? fit_object(*fit.effective) : ordered_json(nullptr);
    if (fit.effective_error) j["effective_lorentzian_error"] = *fit.effective_error;
    j["conventions"] = {{"width", "effective bandwidth = 1/tau_c"},
                        {"delta_omega", "reported as |delta_omega|; sign not identifiable"},
                        {"uncertainties", "1 sigma from (J^T J)^-1"}};
    return j.dump(2) + "\n";
}

std::string fit_error_json(const std::string& message) {
    ordered_json j;
    j["status"] = "not-converged";
    j["error"] = message;
    return j.dump(2) + "\n";
}

std::string histogram_json(const correlator::CoincidenceHistogram& h, const correlator::NormalizedFringe& fringe) {
    ordered_json j;
    j["bin_width_s"] = h.spec.bin_width();
    j["window_s"] = h.spec.window();
    j["bin_count"] = h.spec.bin_count();
    j["delta_t"] = "t_B - t_A";
    j["singles_a"] = h.singles_a;
    j["singles_b"] = h.singles_b;
    j["duration_s"] = h.duration;
    j["total_pairs"] = h.total();
    j["baseline_counts_per_bin"] = fringe.baseline;
    return j.dump(2) + "\n";
}

std::string fringe_csv(const correlator::NormalizedFringe& fringe, const analysis::HomFit* fit) {
    std::string csv = fit ? "bin_center_ns,counts,normalized,error,fit\n" : "bin_center_ns,counts,normalized,error\n";
    for (std::size_t i = 0; i < fringe.centers.size(); ++i) {
        const double counts = i < fringe.counts.size() ? fringe.counts[i] : 0.0;
        csv += fmt::format("{:.4f},{},{:.9g},{:.9g}", fringe.centers[i] * 1e9, counts, fringe.values[i],
                           fringe.errors[i]);
        if (fit) csv += fmt::format(",{:.9g}", fit->evaluate(fringe.centers[i]));
        csv += '\n';
    }
    return csv;
}

std::string fringe_svg(const correlator::NormalizedFringe& fringe, const analysis::HomFit* fit) {
    constexpr double width = 800, height = 480, left = 70, right = 20, top = 20, bottom = 50;
    if (fringe.centers.empty()) throw ConfigError("cannot plot an empty fringe");
    const double x_min = fringe.centers.front() * 1e9;
    const double x_max = fringe.centers.back() * 1e9;
    double y_min = *std::min_element(fringe.values.begin(), fringe.values.end());
    double y_max = *std::max_element(fringe.values.begin(), fringe.values.end());
    const double pad = 0.05 * std::max(y_max - y_min, 1e-3);
    y_min -= pad;
    y_max += pad;
    auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * (width - left - right); };
    auto py = [&](double y) { return top + (y_max - y) / (y_max - y_min) * (height - top - bottom); };

    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        width, height);
    svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", left,
                       top, width - left - right, height - top - bottom);
    const double xs = nice_step(x_max - x_min);
    for (double x = std::ceil(x_min / xs) * xs; x <= x_max + 1e-9; x += xs) {
        svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\" text-anchor=\"middle\">{:g}</text>\n",
                           px(x), height - bottom + 16, x);
    }
    const double ys = nice_step(y_max - y_min);
    for (double y = std::ceil(y_min / ys) * ys; y <= y_max + 1e-12; y += ys) {
        svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\" text-anchor=\"end\">{:.3g}</text>\n",
                           left - 6, py(y) + 4, y);
    }
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"13\" text-anchor=\"middle\">delay t_B - t_A (ns)</text>\n",
                       left + 0.5 * (width - left - right), height - 12);
    svg += fmt::format("<text x=\"16\" y=\"{:.1f}\" font-size=\"13\" text-anchor=\"middle\" "
                       "transform=\"rotate(-90 16 {:.1f})\">normalized coincidences</text>\n",
                       top + 0.5 * (height - top - bottom), top + 0.5 * (height - top - bottom));

    svg += "<polyline fill=\"none\" stroke=\"#4477aa\" stroke-width=\"0.6\" points=\"";
    for (std::size_t i = 0; i < fringe.centers.size(); ++i) {
        svg += fmt::format("{}{:.2f},{:.2f}", i ? " " : "", px(fringe.centers[i] * 1e9), py(fringe.values[i]));
    }
    svg += "\"/>\n";
    if (fit) {
        svg += "<polyline fill=\"none\" stroke=\"#cc3311\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < fringe.centers.size(); ++i) {
            svg += fmt::format("{}{:.2f},{:.2f}", i ? " " : "", px(fringe.centers[i] * 1e9),
                               py(fit->evaluate(fringe.centers[i])));
        }
        svg += "\"/>\n";
    }
    svg += "</svg>\n";
    return svg;
}

std::string beat_json(const std::vector<pipeline::BeatResult>& beats) {
    ordered_json arr = ordered_json::array();
    for (const auto& b : beats) {
        ordered_json j;
        j["label"] = b.label;
        j["segments"] = b.psd.segments;
        j["resolution_hz"] = b.psd.df;
        j["area"] = analysis::psd_area(b.psd);
        if (b.width) {
            j["fwhm_hz"] = b.width->fwhm;
            j["peak_frequency_hz"] = b.width->peak_frequency;
            j["shape_factor"] = b.width->shape_factor;
        } else {
            j["width_error"] = b.width_error.value_or("");
        }
        arr.push_back(j);
    }
    return arr.dump(2) + "\n";
}

RunManifest write_run(const std::filesystem::path& out_dir, const std::string& source,
                      const config::RunConfig& config, const pipeline::PipelineResult& result) {
    std::filesystem::create_directories(out_dir);
    std::vector<Artifact> arts;
    arts.push_back(store(out_dir, "config.toml", config::to_toml(config)));
    if (result.run) {
        event_io::EventFile file;
        file.duration_ps = std::llround(config.experiment.duration * 1e12);
        file.events_a = result.run->events_a;
        file.events_b = result.run->events_b;
        arts.push_back(config.events_csv ? store(out_dir, "events.csv", event_io::encode_csv(file))
                                         : store(out_dir, "events.bin", event_io::encode_binary(file)));
    }
    if (result.histogram && result.fringe) {
        arts.push_back(store(out_dir, "histogram.csv", correlator::histogram_to_csv(*result.histogram, *result.fringe)));
        arts.push_back(store(out_dir, "histogram.json", histogram_json(*result.histogram, *result.fringe)));
    }
    if (result.fringe) {
        const analysis::HomFit* fit = result.fit ? &result.fit->primary : nullptr;
        arts.push_back(store(out_dir, "fringe.csv", fringe_csv(*result.fringe, fit)));
        arts.push_back(store(out_dir, "fringe.svg", fringe_svg(*result.fringe, fit)));
    }
    if (result.fit) {
        arts.push_back(store(out_dir, "fit.json", fit_json(*result.fit)));
    } else if (result.fit_error) {
        arts.push_back(store(out_dir, "fit.json", fit_error_json(*result.fit_error)));
    }
    return finish(out_dir, source, config, std::move(arts));
}

RunManifest write_beat(const std::filesystem::path& out_dir, const std::string& source,
                       const config::RunConfig& config, const std::vector<pipeline::BeatResult>& beats) {
    std::filesystem::create_directories(out_dir);
    std::vector<Artifact> arts;
    arts.push_back(store(out_dir, "config.toml", config::to_toml(config)));
    for (const auto& b : beats) arts.push_back(store(out_dir, "beat_" + b.label + ".csv", analysis::psd_to_csv(b.psd)));
    arts.push_back(store(out_dir, "beat.json", beat_json(beats)));
    return finish(out_dir, source, config, std::move(arts));
}

}  // namespace cwhom::report
