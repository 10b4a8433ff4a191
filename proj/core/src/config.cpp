#include "cwhom/config.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>
#include <toml.hpp>

#include "cwhom/errors.hpp"
#include "cwhom/event_io.hpp"

namespace cwhom::config {
namespace {

using spectral::kPi;

constexpr double kEcdl1Intrinsic = 1.2e6;
constexpr double kEcdl1ModRate = 1e3;
constexpr double kEcdl1Deviation = 5.0e6;
constexpr double kEcdl2Fwhm = 2.2e6;
constexpr double kBeatDetuning = 3.5e6;
constexpr double kPresetRate = 5e5;
// Beat and delay presets resolve |dw| and fitted widths to ~0.5%.
constexpr double kPrecisionPresetRate = 2e6;
constexpr double kPresetDuration = 2.0;
// Common-mode fraction giving V = 0.5 m^2 = 0.432 for balanced rates.
const double kPresetOverlap = std::sqrt(0.864);
// Group index 1.468: 200 m of fiber delays by 979 ns.
constexpr double kSpoolDelays[] = {0.0, 979e-9, 1958e-9, 2937e-9};

class Section {
public:
    Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

    bool present() const { return table_ != nullptr; }
    std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    const toml::node* node(const std::string& key) {
        used_.insert(key);
        return table_ ? table_->get(key) : nullptr;
    }

    double number(const std::string& key, double fallback) {
        const toml::node* n = node(key);
        if (!n) return fallback;
        if (!n->is_number()) throw ConfigError(fmt::format("{}: expected a number", path(key)));
        const double v = n->is_integer() ? static_cast<double>(*n->value<std::int64_t>()) : *n->value<double>();
        if (!std::isfinite(v)) throw ConfigError(fmt::format("{}: must be finite", path(key)));
        return v;
    }

    std::optional<double> optional_number(const std::string& key) {
        if (!table_ || !table_->get(key)) {
            used_.insert(key);
            return std::nullopt;
        }
        return number(key, 0.0);
    }

    double positive(const std::string& key, double fallback) {
        const double v = number(key, fallback);
        if (!(v > 0.0)) throw ConfigError(fmt::format("{}: must be > 0, got {}", path(key), v));
        return v;
    }

    double non_negative(const std::string& key, double fallback) {
        const double v = number(key, fallback);
        if (!(v >= 0.0)) throw ConfigError(fmt::format("{}: must be >= 0, got {}", path(key), v));
        return v;
    }

    double fraction(const std::string& key, double fallback) {
        const double v = number(key, fallback);
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(fmt::format("{}: must be in [0, 1], got {}", path(key), v));
        return v;
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        const toml::node* n = node(key);
        if (!n) return fallback;
        if (!n->is_integer() || *n->value<std::int64_t>() < 0) {
            throw ConfigError(fmt::format("{}: expected a non-negative integer", path(key)));
        }
        return static_cast<std::uint64_t>(*n->value<std::int64_t>());
    }

    bool boolean(const std::string& key, bool fallback) {
        const toml::node* n = node(key);
        if (!n) return fallback;
        if (!n->is_boolean()) throw ConfigError(fmt::format("{}: expected true or false", path(key)));
        return *n->value<bool>();
    }

    std::optional<std::string> string(const std::string& key) {
        const toml::node* n = node(key);
        if (!n) return std::nullopt;
        if (!n->is_string()) throw ConfigError(fmt::format("{}: expected a string", path(key)));
        return *n->value<std::string>();
    }

    Section sub(const std::string& key) {
        const toml::node* n = node(key);
        if (n && !n->is_table()) throw ConfigError(fmt::format("{}: expected a table", path(key)));
        return Section(n ? n->as_table() : nullptr, path(key));
    }

    void finish() const {
        if (!table_) return;
        for (const auto& [key, value] : *table_) {
            if (!used_.count(std::string(key.str()))) {
                throw ConfigError(fmt::format("{}: unknown field", path(std::string(key.str()))));
            }
        }
    }

private:
    const toml::table* table_;
    std::string name_;
    std::set<std::string> used_;
};

spectral::Lineshape parse_lineshape(Section s) {
    if (!s.present()) throw ConfigError(fmt::format("{}: missing lineshape table", s.path("")));
    const auto kind = s.string("kind");
    if (!kind) throw ConfigError(fmt::format("{}: missing field", s.path("kind")));
    spectral::Lineshape shape;
    if (*kind == "lorentzian") {
        shape = spectral::Lorentzian{s.positive("fwhm", 0.0)};
    } else if (*kind == "rectangular") {
        shape = spectral::Rectangular{s.positive("width", 0.0)};
    } else if (*kind == "gaussian") {
        shape = spectral::Gaussian{s.positive("fwhm", 0.0)};
    } else if (*kind == "fm-triangle") {
        shape = spectral::FMTriangle{s.positive("intrinsic_fwhm", 0.0), s.positive("mod_rate", 0.0),
                                     s.positive("deviation", 0.0)};
        try {
            spectral::require_adiabatic(shape);
        } catch (const ConfigError& e) {
            throw AdiabaticApproximationError(fmt::format("{}: {}", s.path("mod_rate"), e.what()));
        }
    } else {
        throw ConfigError(fmt::format(
            "{}: unknown lineshape '{}' (expected lorentzian, rectangular, gaussian or fm-triangle)",
            s.path("kind"), *kind));
    }
    s.finish();
    return shape;
}

lasersim::SourceSpec parse_source(Section s, const lasersim::SourceSpec& defaults) {
    lasersim::SourceSpec spec = defaults;
    if (!s.present()) throw ConfigError(fmt::format("{}: missing section", s.path("")));
    spec.detuning = s.number("detuning", defaults.detuning);
    spec.mean_rate = s.positive("mean_rate", defaults.mean_rate);
    spec.extra_delay = s.non_negative("extra_delay", defaults.extra_delay);
    spec.rng_seed = s.unsigned_integer("rng_seed", defaults.rng_seed);
    spec.lineshape = parse_lineshape(s.sub("lineshape"));
    s.finish();
    return spec;
}

lasersim::DetectorSpec parse_detector(Section s) {
    lasersim::DetectorSpec spec;
    spec.efficiency = s.fraction("efficiency", spec.efficiency);
    spec.dead_time = s.non_negative("dead_time", spec.dead_time);
    spec.dark_rate = s.non_negative("dark_rate", spec.dark_rate);
    spec.jitter_sigma = s.non_negative("jitter_sigma", spec.jitter_sigma);
    s.finish();
    return spec;
}

Stage parse_stage(const std::string& name) {
    if (name == "simulate") return Stage::Simulate;
    if (name == "correlate") return Stage::Correlate;
    if (name == "fit") return Stage::Fit;
    throw ConfigError(fmt::format("stages.run: unknown stage '{}' (expected simulate, correlate or fit)", name));
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

// Splits "a.b.c=value" and stores value (TOML syntax, or a bare string) at
// that path.
void apply_override(toml::table& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError(fmt::format("override '{}' must look like section.key=value", assignment));
    }
    const std::string key_path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    toml::table parsed;
    try {
        parsed = toml::parse("v = " + text);
    } catch (const toml::parse_error&) {
        parsed = toml::table{{"v", text}};
    }
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t dot = key_path.find('.'); ; dot = key_path.find('.', start)) {
        parts.push_back(key_path.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    toml::table* t = &root;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        toml::node* n = t->get(parts[i]);
        if (!n) {
            t->insert(parts[i], toml::table{});
            n = t->get(parts[i]);
        }
        if (!n->is_table()) throw ConfigError(fmt::format("override '{}': {} is not a table", assignment, parts[i]));
        t = n->as_table();
    }
    t->insert_or_assign(parts.back(), *parsed.get("v"));
}

RunConfig from_table(const toml::table& root, const std::filesystem::path& base_dir) {
    RunConfig c;
    Section top(&root, "");

    Section exp = top.sub("experiment");
    auto& e = c.experiment;
    e.duration = exp.non_negative("duration", e.duration);
    e.sample_dt = exp.positive("sample_dt", e.sample_dt);
    e.mode_overlap = exp.fraction("mode_overlap", e.mode_overlap);
    e.segment_duration = exp.positive("segment_duration", e.segment_duration);
    e.detector_seed = exp.unsigned_integer("detector_seed", e.detector_seed);
    e.threads = static_cast<unsigned>(std::max<std::uint64_t>(1, exp.unsigned_integer("threads", e.threads)));
    exp.finish();

    Section stages = top.sub("stages");
    if (const toml::node* run = stages.node("run")) {
        const toml::array* list = run->as_array();
        if (!list || list->empty()) throw ConfigError("stages.run: expected a non-empty array of stage names");
        c.stages.clear();
        for (const auto& item : *list) {
            if (!item.is_string()) throw ConfigError("stages.run: expected stage names as strings");
            c.stages.push_back(parse_stage(*item.value<std::string>()));
        }
    }
    if (auto p = stages.string("events")) c.events_input = resolve(base_dir, *p);
    if (auto p = stages.string("fringe")) c.fringe_input = resolve(base_dir, *p);
    if (auto f = stages.string("event_format")) {
        if (*f != "binary" && *f != "csv") throw ConfigError("stages.event_format: expected binary or csv");
        c.events_csv = *f == "csv";
    }
    stages.finish();

    const bool simulate = c.runs(Stage::Simulate);
    lasersim::SourceSpec defaults_2;
    defaults_2.rng_seed = 2;
    Section s1 = top.sub("source_1");
    Section s2 = top.sub("source_2");
    if (s1.present() || simulate) e.source_1 = parse_source(s1, e.source_1);
    if (s2.present() || simulate) e.source_2 = parse_source(s2, defaults_2);
    e.detector_a = parse_detector(top.sub("detector_a"));
    e.detector_b = parse_detector(top.sub("detector_b"));

    Section hist = top.sub("histogram");
    const double bin_width = hist.positive("bin_width", 0.5e-9);
    const double window = hist.positive("window", 2e-6);
    c.histogram = correlator::HistogramSpec(bin_width, window);
    const auto inner = hist.optional_number("wing_inner");
    const auto outer = hist.optional_number("wing_outer");
    if (inner || outer) {
        const auto def = correlator::default_wings(c.histogram);
        c.wings = correlator::WingRange{inner.value_or(def.inner), outer.value_or(def.outer)};
        if (!(c.wings->inner >= 0.5 * window && c.wings->outer <= window && c.wings->inner < c.wings->outer)) {
            throw ConfigError(fmt::format(
                "histogram.wing_inner/histogram.wing_outer: [{}, {}] must lie within [window/2, window]",
                c.wings->inner, c.wings->outer));
        }
    }
    hist.finish();

    Section fit = top.sub("fit");
    if (auto form = fit.string("gamma_form")) {
        try {
            c.fit.form = analysis::gamma_form_from_string(*form);
        } catch (const ConfigError& err) {
            throw ConfigError(fmt::format("fit.gamma_form: {}", err.what()));
        }
    }
    c.fit.fit_delta_omega = fit.boolean("fit_delta_omega", c.fit.fit_delta_omega);
    c.fit.delta_omega = fit.optional_number("delta_omega");
    c.fit.fit_baseline = fit.boolean("fit_baseline", c.fit.fit_baseline);
    c.fit.signed_gamma = fit.boolean("signed_gamma", c.fit.signed_gamma);
    c.fit.effective_fit = fit.boolean("effective_fit", c.fit.effective_fit);
    fit.finish();
    if (c.fit.delta_omega && std::abs(*c.fit.delta_omega) > kPi / bin_width) {
        throw ConfigError(fmt::format("fit.delta_omega: |{}| rad/s exceeds pi/histogram.bin_width", *c.fit.delta_omega));
    }

    Section beat = top.sub("beat");
    c.beat.duration = beat.positive("duration", c.beat.duration);
    c.beat.segment_length = static_cast<std::size_t>(beat.unsigned_integer("segment_length", c.beat.segment_length));
    c.beat.overlap = beat.number("overlap", c.beat.overlap);
    if (!(c.beat.overlap >= 0.0 && c.beat.overlap < 1.0)) throw ConfigError("beat.overlap: must be in [0, 1)");
    if (c.beat.segment_length < 2) throw ConfigError("beat.segment_length: must be at least 2");
    beat.finish();

    top.finish();

    if (c.runs(Stage::Simulate) && c.runs(Stage::Fit) && !c.runs(Stage::Correlate)) {
        throw ConfigError("stages.run: simulate and fit need correlate in between");
    }
    if (c.runs(Stage::Correlate) && !simulate && !c.events_input) {
        throw ConfigError("stages.events: correlate without simulate needs an event file");
    }
    if (c.runs(Stage::Fit) && !c.runs(Stage::Correlate) && !c.fringe_input) {
        throw ConfigError("stages.fringe: fit without correlate needs a fringe CSV");
    }
    if (simulate) {
        try {
            lasersim::validate(e);
        } catch (const ConfigError& err) {
            throw ConfigError(fmt::format("experiment: {}", err.what()));
        }
    }
    if (c.runs(Stage::Fit) && c.fit.form != analysis::GammaForm::EffectiveLorentzian && !simulate &&
        !(s1.present() && s2.present())) {
        throw ConfigError("fit.gamma_form: physical forms need [source_1] and [source_2] lineshapes");
    }
    return c;
}

std::string lineshape_toml(const spectral::Lineshape& shape) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, spectral::Lorentzian>) {
                return fmt::format("kind = \"lorentzian\"\nfwhm = {:e}\n", s.fwhm);
            } else if constexpr (std::is_same_v<T, spectral::Rectangular>) {
                return fmt::format("kind = \"rectangular\"\nwidth = {:e}\n", s.width);
            } else if constexpr (std::is_same_v<T, spectral::Gaussian>) {
                return fmt::format("kind = \"gaussian\"\nfwhm = {:e}\n", s.fwhm);
            } else {
                return fmt::format("kind = \"fm-triangle\"\nintrinsic_fwhm = {:e}\nmod_rate = {:e}\ndeviation = {:e}\n",
                                   s.intrinsic_fwhm, s.mod_rate, s.deviation);
            }
        },
        shape);
}

std::string number(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

bool RunConfig::runs(Stage stage) const {
    return std::find(stages.begin(), stages.end(), stage) != stages.end();
}

correlator::WingRange RunConfig::wing_range() const {
    return wings.value_or(correlator::default_wings(histogram));
}

std::string to_string(Stage stage) {
    switch (stage) {
    case Stage::Simulate:
        return "simulate";
    case Stage::Correlate:
        return "correlate";
    case Stage::Fit:
        return "fit";
    }
    return "unknown";
}

RunConfig parse_config(const std::string& toml_text, const std::filesystem::path& base_dir,
                       const std::vector<std::string>& overrides) {
    toml::table root;
    try {
        root = toml::parse(toml_text);
    } catch (const toml::parse_error& err) {
        throw ConfigError(fmt::format("TOML syntax error at line {}, column {}: {}", err.source().begin.line,
                                      err.source().begin.column, err.description()));
    }
    for (const auto& o : overrides) apply_override(root, o);
    return from_table(root, base_dir);
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::string text;
    try {
        text = event_io::read_file(path);
    } catch (const Error& err) {
        throw ConfigError(err.what());
    }
    return parse_config(text, path.parent_path(), overrides);
}

std::string to_toml(const RunConfig& c) {
    const auto& e = c.experiment;
    std::string out;
    out += fmt::format("[experiment]\nduration = {}\nsample_dt = {}\nmode_overlap = {}\nsegment_duration = {}\n"
                       "detector_seed = {}\nthreads = {}\n\n",
                       number(e.duration), number(e.sample_dt), number(e.mode_overlap),
                       number(e.segment_duration), e.detector_seed, e.threads);
    auto source = [&](const char* name, const lasersim::SourceSpec& s) {
        out += fmt::format("[{}]\ndetuning = {}\nmean_rate = {}\nextra_delay = {}\nrng_seed = {}\n\n", name,
                           number(s.detuning), number(s.mean_rate), number(s.extra_delay), s.rng_seed);
        out += fmt::format("[{}.lineshape]\n{}\n", name, lineshape_toml(s.lineshape));
    };
    source("source_1", e.source_1);
    source("source_2", e.source_2);
    auto detector = [&](const char* name, const lasersim::DetectorSpec& d) {
        out += fmt::format("[{}]\nefficiency = {}\ndead_time = {}\ndark_rate = {}\njitter_sigma = {}\n\n", name,
                           number(d.efficiency), number(d.dead_time), number(d.dark_rate),
                           number(d.jitter_sigma));
    };
    detector("detector_a", e.detector_a);
    detector("detector_b", e.detector_b);
    out += fmt::format("[histogram]\nbin_width = {}\nwindow = {}\n", number(c.histogram.bin_width()),
                       number(c.histogram.window()));
    if (c.wings) out += fmt::format("wing_inner = {}\nwing_outer = {}\n", number(c.wings->inner), number(c.wings->outer));
    out += fmt::format("\n[fit]\ngamma_form = \"{}\"\nfit_delta_omega = {}\n", analysis::to_string(c.fit.form),
                       c.fit.fit_delta_omega);
    if (c.fit.delta_omega) out += fmt::format("delta_omega = {}\n", number(*c.fit.delta_omega));
    out += fmt::format("fit_baseline = {}\nsigned_gamma = {}\neffective_fit = {}\n\n", c.fit.fit_baseline,
                       c.fit.signed_gamma, c.fit.effective_fit);
    out += fmt::format("[beat]\nduration = {}\nsegment_length = {}\noverlap = {}\n\n", number(c.beat.duration),
                       c.beat.segment_length, number(c.beat.overlap));
    out += "[stages]\nrun = [";
    for (std::size_t i = 0; i < c.stages.size(); ++i) {
        out += fmt::format("{}\"{}\"", i ? ", " : "", to_string(c.stages[i]));
    }
    out += "]\n";
    if (c.events_input) out += fmt::format("events = \"{}\"\n", c.events_input->generic_string());
    if (c.fringe_input) out += fmt::format("fringe = \"{}\"\n", c.fringe_input->generic_string());
    out += fmt::format("event_format = \"{}\"\n", c.events_csv ? "csv" : "binary");
    return out;
}

std::vector<std::string> preset_names() {
    return {"fig3", "fig4-plus", "fig4-zero", "fig4-minus", "fig5-0m", "fig5-200m", "fig5-400m", "fig5-600m"};
}

std::string preset_toml(const std::string& name) {
    double detuning_1 = 0.0;
    double delay_2 = 0.0;
    double rate = kPrecisionPresetRate;
    bool beat = false;
    if (name == "fig3") {
        rate = kPresetRate;
    } else if (name == "fig4-zero") {
    } else if (name == "fig4-plus") {
        detuning_1 = kBeatDetuning;
        beat = true;
    } else if (name == "fig4-minus") {
        detuning_1 = -kBeatDetuning;
        beat = true;
    } else if (name == "fig5-0m") {
        delay_2 = kSpoolDelays[0];
    } else if (name == "fig5-200m") {
        delay_2 = kSpoolDelays[1];
    } else if (name == "fig5-400m") {
        delay_2 = kSpoolDelays[2];
    } else if (name == "fig5-600m") {
        delay_2 = kSpoolDelays[3];
    } else {
        std::string known;
        for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
        throw ConfigError(fmt::format("unknown preset '{}' (known: {})", name, known));
    }
    return fmt::format(
        "[experiment]\n"
        "duration = {}\n"
        "sample_dt = 2e-9\n"
        "mode_overlap = {}\n"
        "\n"
        "[source_1]\n"
        "detuning = {}\n"
        "mean_rate = {}\n"
        "rng_seed = 11\n"
        "\n"
        "[source_1.lineshape]\n"
        "kind = \"fm-triangle\"\n"
        "intrinsic_fwhm = {}\n"
        "mod_rate = {}\n"
        "deviation = {}\n"
        "\n"
        "[source_2]\n"
        "mean_rate = {}\n"
        "extra_delay = {}\n"
        "rng_seed = 22\n"
        "\n"
        "[source_2.lineshape]\n"
        "kind = \"lorentzian\"\n"
        "fwhm = {}\n"
        "\n"
        "[histogram]\n"
        "bin_width = 0.5e-9\n"
        "window = 2e-6\n"
        "\n"
        "[fit]\n"
        "gamma_form = \"physical\"\n"
        "fit_delta_omega = {}\n",
        number(kPresetDuration), number(kPresetOverlap), number(detuning_1), number(rate),
        number(kEcdl1Intrinsic), number(kEcdl1ModRate), number(kEcdl1Deviation), number(rate),
        number(delay_2), number(kEcdl2Fwhm), beat);
}

RunConfig preset_config(const std::string& name, const std::vector<std::string>& overrides) {
    return parse_config(preset_toml(name), {}, overrides);
}

analysis::FitModel fit_model(const RunConfig& c) {
    analysis::FitModel m;
    m.form = c.fit.form;
    m.lineshape_1 = c.experiment.source_1.lineshape;
    m.lineshape_2 = c.experiment.source_2.lineshape;
    m.fit_delta_omega = c.fit.fit_delta_omega;
    m.delta_omega = c.fit.delta_omega.value_or(
        c.fit.fit_delta_omega ? 0.0 : 2.0 * kPi * (c.experiment.source_1.detuning - c.experiment.source_2.detuning));
    m.fit_baseline = c.fit.fit_baseline;
    m.sign = c.fit.signed_gamma ? spectral::CoherenceSign::Signed : spectral::CoherenceSign::Envelope;
    return m;
}

analysis::FitModel effective_model(const RunConfig& c) {
    analysis::FitModel m = fit_model(c);
    m.form = analysis::GammaForm::EffectiveLorentzian;
    return m;
}

void apply_seed(RunConfig& c, std::uint64_t seed) {
    // TOML integers are signed 64-bit.
    constexpr std::uint64_t mask = 0x7fffffffffffffffULL;
    c.experiment.source_1.rng_seed = lasersim::derive_seed(seed, 1, 0) & mask;
    c.experiment.source_2.rng_seed = lasersim::derive_seed(seed, 2, 0) & mask;
    c.experiment.detector_seed = lasersim::derive_seed(seed, 3, 0) & mask;
}

}  // namespace cwhom::config
