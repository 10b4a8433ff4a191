// cwhom: reproduction presets and generic experiment driver.
//
//   cwhom preset fig3 --out runs/fig3
//   cwhom run experiment.toml --seed 7
//   cwhom correlate runs/fig3/events.bin --out runs/corr
//   cwhom fit runs/fig3/fringe.csv --config experiment.toml
//   cwhom beat experiment.toml
//
// Exit codes: 0 success, 2 validation error, 3 non-convergence.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cwhom/config.hpp"
#include "cwhom/errors.hpp"
#include "cwhom/pipeline.hpp"
#include "cwhom/report.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNonConvergence = 3;

struct Common {
    std::optional<std::uint64_t> seed;
    std::optional<double> duration;
    std::optional<unsigned> threads;
    std::string out;
    std::string format = "json";
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c, const std::string& default_out) {
    c.out = default_out;
    cmd->add_option("--seed", c.seed, "Base seed for every random stream");
    cmd->add_option("--duration", c.duration, "Acquisition (or beat synthesis) duration, s");
    cmd->add_option("--threads", c.threads, "Worker threads");
    cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
    cmd->add_option("--format", c.format, "Summary printed to stdout")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    cmd->add_option("--set", c.sets, "Config override section.key=value (repeatable)");
}

std::vector<std::string> overrides(const Common& c, bool beat = false) {
    std::vector<std::string> out = c.sets;
    if (c.duration) out.push_back(fmt::format("{}.duration={:.17g}", beat ? "beat" : "experiment", *c.duration));
    if (c.threads) out.push_back(fmt::format("experiment.threads={}", *c.threads));
    return out;
}

void seed(cwhom::config::RunConfig& config, const Common& c) {
    if (c.seed) cwhom::config::apply_seed(config, *c.seed);
}

void print_summary(const cwhom::report::RunManifest& m, const std::string& format) {
    if (format == "json") {
        std::cout << cwhom::report::manifest_json(m);
        return;
    }
    std::cout << "artifact,sha256,bytes\n";
    for (const auto& a : m.artifacts) std::cout << fmt::format("{},{},{}\n", a.name, a.sha256, a.bytes);
}

int finish_run(const cwhom::config::RunConfig& config, const Common& c, const std::string& source) {
    const auto result = cwhom::pipeline::execute(config);
    const auto manifest = cwhom::report::write_run(c.out, source, config, result);
    print_summary(manifest, c.format);
    if (result.fit_error) {
        std::cerr << "fit did not converge: " << *result.fit_error << "\n";
        return kExitNonConvergence;
    }
    if (result.fit) {
        const auto& fit = result.fit->primary;
        std::cerr << fmt::format("V = {:.4f} +/- {:.4f}, reduced chi2 = {:.3f}\n", fit.value("visibility"),
                                 fit.sigma("visibility"), fit.reduced_chi2);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time-resolved HOM interference simulator for independent CW coherent sources"};
    app.require_subcommand(1);

    Common preset_opts, run_opts, corr_opts, fit_opts, beat_opts;
    std::string preset_name, config_path, events_path, fringe_path, beat_config;
    std::optional<std::string> fit_config;
    std::optional<double> bin_width, window;
    std::optional<std::string> gamma_form;
    bool fit_delta_omega = false;

    auto* preset = app.add_subcommand("preset", "Run a reproduction preset");
    preset->add_option("name", preset_name, "fig3, fig4-plus, fig4-zero, fig4-minus, fig5-0m, fig5-200m, fig5-400m, fig5-600m")
        ->required();
    add_common(preset, preset_opts, "cwhom-out");

    auto* run = app.add_subcommand("run", "Run the stages of a TOML config");
    run->add_option("config", config_path, "Config file")->required();
    add_common(run, run_opts, "cwhom-out");

    auto* corr = app.add_subcommand("correlate", "Histogram an event file");
    corr->add_option("events", events_path, "Binary or CSV event file")->required();
    corr->add_option("--bin-width", bin_width, "Bin width, s");
    corr->add_option("--window", window, "Half-range, s");
    add_common(corr, corr_opts, "cwhom-out");

    auto* fit = app.add_subcommand("fit", "Fit a fringe CSV");
    fit->add_option("fringe", fringe_path, "CSV with bin_center_ns,counts,normalized,error")->required();
    fit->add_option("--config", fit_config, "Config supplying lineshapes and fit settings");
    fit->add_option("--gamma-form", gamma_form, "effective-lorentzian, physical or physical-free");
    fit->add_flag("--fit-delta-omega", fit_delta_omega, "Leave the beat frequency free");
    add_common(fit, fit_opts, "cwhom-out");

    auto* beat = app.add_subcommand("beat", "Beat spectra of the configured sources");
    beat->add_option("config", beat_config, "Config file")->required();
    add_common(beat, beat_opts, "cwhom-out");

    CLI11_PARSE(app, argc, argv);

    try {
        using cwhom::config::RunConfig;
        if (*preset) {
            RunConfig config = cwhom::config::preset_config(preset_name, overrides(preset_opts));
            seed(config, preset_opts);
            return finish_run(config, preset_opts, "preset:" + preset_name);
        }
        if (*run) {
            RunConfig config = cwhom::config::load_config(config_path, overrides(run_opts));
            seed(config, run_opts);
            return finish_run(config, run_opts, config_path);
        }
        if (*corr) {
            std::vector<std::string> sets = overrides(corr_opts);
            sets.push_back("stages.run=[\"correlate\"]");
            sets.push_back(fmt::format("stages.events=\"{}\"", events_path));
            if (bin_width) sets.push_back(fmt::format("histogram.bin_width={:.17g}", *bin_width));
            if (window) sets.push_back(fmt::format("histogram.window={:.17g}", *window));
            RunConfig config = cwhom::config::parse_config("", {}, sets);
            return finish_run(config, corr_opts, events_path);
        }
        if (*fit) {
            std::vector<std::string> sets = overrides(fit_opts);
            sets.push_back("stages.run=[\"fit\"]");
            sets.push_back(fmt::format("stages.fringe=\"{}\"", fringe_path));
            if (gamma_form) sets.push_back(fmt::format("fit.gamma_form=\"{}\"", *gamma_form));
            if (fit_delta_omega) sets.push_back("fit.fit_delta_omega=true");
            RunConfig config;
            if (fit_config) {
                config = cwhom::config::load_config(*fit_config, sets);
            } else {
                if (!gamma_form) sets.push_back("fit.gamma_form=\"effective-lorentzian\"");
                config = cwhom::config::parse_config("", {}, sets);
            }
            return finish_run(config, fit_opts, fringe_path);
        }
        if (*beat) {
            RunConfig config = cwhom::config::load_config(beat_config, overrides(beat_opts, true));
            seed(config, beat_opts);
            const auto beats = cwhom::pipeline::beat_spectra(config);
            const auto manifest = cwhom::report::write_beat(beat_opts.out, beat_config, config, beats);
            print_summary(manifest, beat_opts.format);
            for (const auto& b : beats) {
                if (b.width) {
                    std::cerr << fmt::format("{}: FWHM {:.3f} MHz, shape factor {:.2f}\n", b.label,
                                             b.width->fwhm * 1e-6, b.width->shape_factor);
                }
            }
            return 0;
        }
    } catch (const cwhom::ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNonConvergence;
    } catch (const cwhom::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return 0;
}
