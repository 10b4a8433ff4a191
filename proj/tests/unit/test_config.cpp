#include <filesystem>

#include <gtest/gtest.h>

#include "cwhom/config.hpp"
#include "cwhom/errors.hpp"
#include "cwhom/event_io.hpp"
#include "cwhom/pipeline.hpp"
#include "cwhom/report.hpp"

namespace {

using namespace cwhom::config;
namespace fs = std::filesystem;

std::string error_of(const std::string& toml, const std::vector<std::string>& overrides = {}) {
    try {
        parse_config(toml, {}, overrides);
    } catch (const cwhom::ConfigError& e) {
        return e.what();
    }
    return {};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("cwhom_config_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

TEST(Presets, AllParseAndValidate) {
    const auto names = preset_names();
    EXPECT_EQ(names.size(), 8u);
    for (const auto& n : names) {
        const auto c = preset_config(n);
        EXPECT_NO_THROW(cwhom::lasersim::validate(c.experiment)) << n;
        EXPECT_DOUBLE_EQ(c.experiment.duration, 2.0);
        EXPECT_NEAR(c.experiment.mode_overlap * c.experiment.mode_overlap, 0.864, 1e-12);
        EXPECT_EQ(c.fit.form, cwhom::analysis::GammaForm::Physical);
        EXPECT_EQ(c.histogram, cwhom::correlator::HistogramSpec(0.5e-9, 2e-6));
    }
}

TEST(Presets, Specifics) {
    EXPECT_DOUBLE_EQ(preset_config("fig3").experiment.source_1.mean_rate, 5e5);
    const auto plus = preset_config("fig4-plus");
    EXPECT_DOUBLE_EQ(plus.experiment.source_1.detuning, 3.5e6);
    EXPECT_TRUE(plus.fit.fit_delta_omega);
    EXPECT_DOUBLE_EQ(preset_config("fig4-minus").experiment.source_1.detuning, -3.5e6);
    EXPECT_FALSE(preset_config("fig4-zero").fit.fit_delta_omega);
    EXPECT_NEAR(preset_config("fig5-200m").experiment.source_2.extra_delay, 979e-9, 1e-15);
    EXPECT_NEAR(preset_config("fig5-600m").experiment.source_2.extra_delay, 2937e-9, 1e-15);
    const auto fm = std::get<cwhom::spectral::FMTriangle>(plus.experiment.source_1.lineshape);
    EXPECT_DOUBLE_EQ(fm.mod_rate, 1e3);
    EXPECT_DOUBLE_EQ(std::get<cwhom::spectral::Lorentzian>(plus.experiment.source_2.lineshape).fwhm, 2.2e6);
    EXPECT_EQ(plus.experiment.source_1.rng_seed, 11u);
    EXPECT_EQ(plus.experiment.source_2.rng_seed, 22u);
}

TEST(Presets, UnknownNameListsKnownOnes) {
    try {
        preset_toml("fig9");
        FAIL();
    } catch (const cwhom::ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("fig4-plus"), std::string::npos);
    }
}

TEST(ParseConfig, RoundTripThroughToml) {
    for (const auto& n : preset_names()) {
        const auto c = preset_config(n, {"histogram.wing_inner=1.2e-6", "fit.delta_omega=100"});
        const auto text = to_toml(c);
        EXPECT_EQ(to_toml(parse_config(text)), text) << n;
    }
}

TEST(ParseConfig, Overrides) {
    const auto c = preset_config("fig3", {"experiment.mode_overlap=1", "source_2.lineshape.fwhm=1e6",
                                          "fit.gamma_form=\"effective-lorentzian\"", "experiment.threads=2"});
    EXPECT_DOUBLE_EQ(c.experiment.mode_overlap, 1.0);
    EXPECT_DOUBLE_EQ(std::get<cwhom::spectral::Lorentzian>(c.experiment.source_2.lineshape).fwhm, 1e6);
    EXPECT_EQ(c.fit.form, cwhom::analysis::GammaForm::EffectiveLorentzian);
    EXPECT_EQ(c.experiment.threads, 2u);
    EXPECT_THROW(preset_config("fig3", {"mode_overlap"}), cwhom::ConfigError);
    EXPECT_THROW(preset_config("fig3", {"experiment.mode_overlap=abc"}), cwhom::ConfigError);
}

TEST(ParseConfig, ErrorsNameTheField) {
    const auto base = preset_toml("fig3");
    EXPECT_NE(error_of(base, {"source_1.mean_rate=-1"}).find("source_1.mean_rate"), std::string::npos);
    EXPECT_NE(error_of(base, {"source_1.colour=2"}).find("source_1.colour: unknown field"), std::string::npos);
    EXPECT_NE(error_of(base, {"experiment.mode_overlap=2"}).find("experiment.mode_overlap"), std::string::npos);
    const auto hist = error_of(base, {"histogram.bin_width=0.3e-9"});
    EXPECT_NE(hist.find("bin_width"), std::string::npos);
    EXPECT_NE(hist.find("window"), std::string::npos);
    EXPECT_NE(error_of(base, {"stages.run=[\"simulate\",\"fit\"]"}).find("stages.run"), std::string::npos);
    EXPECT_NE(error_of(base, {"stages.run=[\"correlate\"]"}).find("stages.events"), std::string::npos);
    EXPECT_NE(error_of(base, {"stages.run=[\"fit\"]"}).find("stages.fringe"), std::string::npos);
    EXPECT_NE(error_of(base, {"source_1.lineshape.kind=\"voigt\""}).find("source_1.lineshape.kind"), std::string::npos);
    EXPECT_NE(error_of("[experiment\nduration = 1\n").find("TOML syntax error"), std::string::npos);
    EXPECT_NE(error_of(base, {"experiment.sample_dt=5e-9"}).find("experiment"), std::string::npos);
}

TEST(ParseConfig, AdiabaticViolationHasItsOwnType) {
    EXPECT_THROW(preset_config("fig3", {"source_1.lineshape.mod_rate=1e6"}), cwhom::AdiabaticApproximationError);
}

TEST(ParseConfig, RelativeInputsResolveAgainstBaseDir) {
    const auto c = parse_config(preset_toml("fig3"), "/data/run", {"stages.run=[\"fit\"]", "stages.fringe=\"f.csv\""});
    ASSERT_TRUE(c.fringe_input);
    EXPECT_EQ(c.fringe_input->generic_string(), "/data/run/f.csv");
    EXPECT_FALSE(c.runs(Stage::Simulate));
    EXPECT_TRUE(c.runs(Stage::Fit));
}

TEST(FitModel, DeltaOmegaDefaults) {
    const auto zero = fit_model(preset_config("fig4-zero"));
    EXPECT_FALSE(zero.fit_delta_omega);
    EXPECT_DOUBLE_EQ(zero.delta_omega, 0.0);
    const auto held = fit_model(preset_config("fig4-plus", {"fit.fit_delta_omega=false"}));
    EXPECT_NEAR(held.delta_omega, 2 * 3.14159265358979 * 3.5e6, 1.0);
    EXPECT_EQ(effective_model(preset_config("fig3")).form, cwhom::analysis::GammaForm::EffectiveLorentzian);
}

TEST(ApplySeed, DeterministicAndDistinct) {
    auto a = preset_config("fig3");
    auto b = preset_config("fig3");
    apply_seed(a, 42);
    apply_seed(b, 42);
    EXPECT_EQ(to_toml(a), to_toml(b));
    EXPECT_NE(a.experiment.source_1.rng_seed, a.experiment.source_2.rng_seed);
    EXPECT_LT(a.experiment.detector_seed, 1ULL << 63);
    apply_seed(b, 43);
    EXPECT_NE(to_toml(a), to_toml(b));
    EXPECT_EQ(to_toml(parse_config(to_toml(a))), to_toml(a));
}

RunConfig quick_config() {
    return preset_config("fig3", {"experiment.duration=0.05", "experiment.mode_overlap=1"});
}

TEST(Pipeline, StagesComposeToTheFullRun) {
    const auto dir = scratch("stages");
    const auto full_config = quick_config();
    const auto full = cwhom::pipeline::execute(full_config);
    ASSERT_TRUE(full.run && full.histogram && full.fringe && full.fit);
    EXPECT_FALSE(full.fit_error);

    cwhom::event_io::EventFile file;
    file.duration_ps = 50000000000;
    file.events_a = full.run->events_a;
    file.events_b = full.run->events_b;
    cwhom::event_io::write_events(dir / "events.bin", file, false);
    auto corr = parse_config(to_toml(full_config), dir, {"stages.run=[\"correlate\"]", "stages.events=\"events.bin\""});
    const auto correlated = cwhom::pipeline::execute(corr);
    ASSERT_TRUE(correlated.histogram);
    EXPECT_FALSE(correlated.run);
    EXPECT_EQ(correlated.histogram->counts, full.histogram->counts);
    EXPECT_EQ(correlated.histogram->singles_a, full.histogram->singles_a);
    EXPECT_NEAR(correlated.histogram->duration, full.histogram->duration, 1e-12);

    cwhom::event_io::write_file(dir / "fringe.csv", cwhom::correlator::histogram_to_csv(*full.histogram, *full.fringe));
    auto fit_only = parse_config(to_toml(full_config), dir, {"stages.run=[\"fit\"]", "stages.fringe=\"fringe.csv\""});
    const auto fitted = cwhom::pipeline::execute(fit_only);
    ASSERT_TRUE(fitted.fit);
    EXPECT_NEAR(fitted.fit->primary.value("visibility"), full.fit->primary.value("visibility"), 1e-6);
    fs::remove_all(dir);
}

TEST(Pipeline, MissingInputFileIsAConfigError) {
    auto c = parse_config(to_toml(quick_config()), "/nonexistent", {"stages.run=[\"correlate\"]", "stages.events=\"x.bin\""});
    EXPECT_THROW(cwhom::pipeline::execute(c), cwhom::ConfigError);
}

TEST(Pipeline, BeatSpectraLabels) {
    const auto c = preset_config("fig3", {"beat.duration=0.002", "beat.segment_length=4096"});
    const auto beats = cwhom::pipeline::beat_spectra(c);
    ASSERT_EQ(beats.size(), 3u);
    EXPECT_EQ(beats[0].label, "source_1");
    EXPECT_EQ(beats[1].label, "source_2");
    EXPECT_EQ(beats[2].label, "source_1_vs_source_2");
    ASSERT_TRUE(beats[1].width);
    EXPECT_NEAR(beats[1].width->fwhm, 2.2e6, 0.5e6);
}

TEST(Report, Sha256KnownVectors) {
    EXPECT_EQ(cwhom::report::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(cwhom::report::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Report, RepeatedRunsAreByteIdentical) {
    const auto c = quick_config();
    const auto d1 = scratch("repeat1");
    const auto d2 = scratch("repeat2");
    const auto m1 = cwhom::report::write_run(d1, "test", c, cwhom::pipeline::execute(c));
    const auto m2 = cwhom::report::write_run(d2, "test", c, cwhom::pipeline::execute(c));
    ASSERT_EQ(m1.artifacts.size(), m2.artifacts.size());
    for (std::size_t i = 0; i < m1.artifacts.size(); ++i) {
        EXPECT_EQ(m1.artifacts[i].name, m2.artifacts[i].name);
        EXPECT_EQ(m1.artifacts[i].sha256, m2.artifacts[i].sha256) << m1.artifacts[i].name;
        EXPECT_EQ(cwhom::report::sha256_hex(cwhom::event_io::read_file(d1 / m1.artifacts[i].name)),
                  m1.artifacts[i].sha256);
    }
    for (const char* name : {"config.toml", "events.bin", "histogram.csv", "fringe.csv", "fringe.svg", "fit.json",
                             "manifest.json"}) {
        EXPECT_TRUE(fs::exists(d1 / name)) << name;
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
}

}  // namespace
