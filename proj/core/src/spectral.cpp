#include "cwhom/spectral.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "cwhom/errors.hpp"

namespace cwhom::spectral {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double sinc(double x) {
    if (std::abs(x) < 1e-6) return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

void require_positive(double value, const char* name) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw ConfigError(fmt::format("lineshape parameter {} must be positive and finite, got {}",
                                      name, value));
    }
}

// Cumulative distribution of a unit-area Lorentzian.
double lorentzian_cdf(double f, double fwhm) {
    return 0.5 + std::atan(2.0 * f / fwhm) / kPi;
}

constexpr double kFourLn2 = 2.772588722239781;  // 4 ln 2

}  // namespace

void validate(const Lineshape& shape) {
    std::visit(Overloaded{
                   [](const Lorentzian& l) { require_positive(l.fwhm, "fwhm"); },
                   [](const Rectangular& r) { require_positive(r.width, "width"); },
                   [](const Gaussian& g) { require_positive(g.fwhm, "fwhm"); },
                   [](const FMTriangle& fm) {
                       require_positive(fm.intrinsic_fwhm, "intrinsic_fwhm");
                       require_positive(fm.mod_rate, "mod_rate");
                       require_positive(fm.deviation, "deviation");
                   },
               },
               shape);
}

void require_adiabatic(const Lineshape& shape) {
    if (const auto* fm = std::get_if<FMTriangle>(&shape)) {
        if (fm->mod_rate > fm->deviation / 100.0) {
            throw AdiabaticApproximationError(fmt::format(
                "FM modulation rate {} Hz exceeds deviation/100 = {} Hz; quasi-static g1 invalid",
                fm->mod_rate, fm->deviation / 100.0));
        }
    }
}

std::string kind_name(const Lineshape& shape) {
    return std::visit(Overloaded{
                          [](const Lorentzian&) { return std::string("lorentzian"); },
                          [](const Rectangular&) { return std::string("rectangular"); },
                          [](const Gaussian&) { return std::string("gaussian"); },
                          [](const FMTriangle&) { return std::string("fm_triangle"); },
                      },
                      shape);
}

std::string describe(const Lineshape& shape) {
    return std::visit(
        Overloaded{
            [](const Lorentzian& l) { return fmt::format("Lorentzian{{fwhm={} Hz}}", l.fwhm); },
            [](const Rectangular& r) { return fmt::format("Rectangular{{width={} Hz}}", r.width); },
            [](const Gaussian& g) { return fmt::format("Gaussian{{fwhm={} Hz}}", g.fwhm); },
            [](const FMTriangle& fm) {
                return fmt::format("FMTriangle{{intrinsic={} Hz, rate={} Hz, deviation={} Hz}}",
                                   fm.intrinsic_fwhm, fm.mod_rate, fm.deviation);
            },
        },
        shape);
}

double spectral_extent(const Lineshape& shape) {
    return std::visit(Overloaded{
                          [](const Lorentzian& l) { return l.fwhm; },
                          [](const Rectangular& r) { return r.width; },
                          [](const Gaussian& g) { return g.fwhm; },
                          [](const FMTriangle& fm) { return fm.deviation + fm.intrinsic_fwhm; },
                      },
                      shape);
}

double primary_width(const Lineshape& shape) {
    return std::visit(Overloaded{
                          [](const Lorentzian& l) { return l.fwhm; },
                          [](const Rectangular& r) { return r.width; },
                          [](const Gaussian& g) { return g.fwhm; },
                          [](const FMTriangle& fm) { return fm.deviation; },
                      },
                      shape);
}

Lineshape with_primary_width(const Lineshape& shape, double width) {
    return std::visit(Overloaded{
                          [&](const Lorentzian&) -> Lineshape { return Lorentzian{width}; },
                          [&](const Rectangular&) -> Lineshape { return Rectangular{width}; },
                          [&](const Gaussian&) -> Lineshape { return Gaussian{width}; },
                          [&](const FMTriangle& fm) -> Lineshape {
                              return FMTriangle{fm.intrinsic_fwhm, fm.mod_rate, width};
                          },
                      },
                      shape);
}

double g1(const Lineshape& shape, double tau) {
    require_adiabatic(shape);
    const double t = std::abs(tau);
    return std::visit(Overloaded{
                          [t](const Lorentzian& l) { return std::exp(-kPi * l.fwhm * t); },
                          [t](const Rectangular& r) { return sinc(kPi * r.width * t); },
                          [t](const Gaussian& g) {
                              const double x = kPi * g.fwhm * t;
                              return std::exp(-x * x / kFourLn2);
                          },
                          [t](const FMTriangle& fm) {
                              return sinc(kPi * fm.deviation * t) *
                                     std::exp(-kPi * fm.intrinsic_fwhm * t);
                          },
                      },
                      shape);
}

double lineshape_psd(const Lineshape& shape, double f) {
    return std::visit(
        Overloaded{
            [f](const Lorentzian& l) {
                const double half = 0.5 * l.fwhm;
                return half / (kPi * (f * f + half * half));
            },
            [f](const Rectangular& r) { return std::abs(f) <= 0.5 * r.width ? 1.0 / r.width : 0.0; },
            [f](const Gaussian& g) {
                const double sigma = g.fwhm / std::sqrt(2.0 * kFourLn2);
                return std::exp(-0.5 * f * f / (sigma * sigma)) / (sigma * std::sqrt(2.0 * kPi));
            },
            [f](const FMTriangle& fm) {
                // Uniform dwell over the sweep convolved with the intrinsic Lorentzian.
                const double half = 0.5 * fm.deviation;
                return (lorentzian_cdf(f + half, fm.intrinsic_fwhm) -
                        lorentzian_cdf(f - half, fm.intrinsic_fwhm)) /
                       fm.deviation;
            },
        },
        shape);
}

double mutual_coherence(const Lineshape& l1, const Lineshape& l2, double tau, CoherenceSign sign) {
    const double product = g1(l1, tau) * g1(l2, tau);
    return sign == CoherenceSign::Envelope ? std::abs(product) : product;
}

FringeModel::FringeModel(double visibility, Lineshape l1, Lineshape l2, double delta_omega,
                         bool classical, CoherenceSign sign)
    : visibility_(visibility),
      l1_(std::move(l1)),
      l2_(std::move(l2)),
      delta_omega_(delta_omega),
      classical_(classical),
      sign_(sign) {
    if (!(visibility >= 0.0 && visibility <= 1.0)) {
        throw ConfigError(fmt::format("visibility {} outside [0, 1]", visibility));
    }
    if (classical && visibility > 0.5) {
        throw ConfigError(
            fmt::format("visibility {} exceeds the classical bound 0.5", visibility));
    }
    if (!std::isfinite(delta_omega)) throw ConfigError("delta_omega must be finite");
    validate(l1_);
    validate(l2_);
    require_adiabatic(l1_);
    require_adiabatic(l2_);
}

double coincidence_probability(const FringeModel& model, double delta_t) {
    return 1.0 - model.visibility() * model.gamma(delta_t) *
                     std::cos(model.delta_omega() * delta_t);
}

namespace {

constexpr double kSearchWindow = 10e-6;
constexpr double kScanStep = 0.5e-9;
constexpr double kBisectionTolerance = 1e-12;

// First tau > 0 where |Gamma| drops to `level`, bisected to 1 ps.
double first_crossing(const FringeModel& model, double level) {
    auto envelope = [&](double tau) {
        return std::abs(mutual_coherence(model.lineshape_1(), model.lineshape_2(), tau,
                                         CoherenceSign::Envelope));
    };
    double lo = 0.0;
    for (double hi = kScanStep; hi <= kSearchWindow + 0.5 * kScanStep; hi += kScanStep) {
        if (envelope(hi) <= level) {
            while (hi - lo > kBisectionTolerance) {
                const double mid = 0.5 * (lo + hi);
                (envelope(mid) > level ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
        }
        lo = hi;
    }
    throw MetricUnavailableError(
        fmt::format("coherence does not fall to {} within {} s", level, kSearchWindow));
}

}  // namespace

FringeMetrics fringe_metrics(const FringeModel& model) {
    if (!(model.visibility() > 0.0)) {
        throw MetricUnavailableError("flat fringe (V = 0) has no width");
    }
    FringeMetrics m{};
    m.depth = 1.0 - coincidence_probability(model, 0.0);
    // 1 - V*Gamma crosses 1 - V/2 where Gamma = 1/2.
    m.dip_fwhm = 2.0 * first_crossing(model, 0.5);
    m.coherence_half_width = first_crossing(model, std::exp(-1.0));
    if (model.delta_omega() != 0.0) {
        const double node = kPi / (2.0 * std::abs(model.delta_omega()));
        m.beat_nodes = {-node, node};
    }
    m.inverse_fwhm_hz = 1.0 / m.dip_fwhm;
    m.inverse_coherence_hz = 1.0 / m.coherence_half_width;
    m.lorentzian_equivalent_hz = 1.0 / (kPi * m.coherence_half_width);
    return m;
}

}  // namespace cwhom::spectral
