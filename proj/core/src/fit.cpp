#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "cwhom/analysis.hpp"
#include "cwhom/errors.hpp"
#include "cwhom/levenberg_marquardt.hpp"

namespace cwhom::analysis {
namespace {

using spectral::kPi;

constexpr std::size_t kBinsPerParameter = 10;
constexpr double kAggregateBelowCounts = 10.0;
constexpr int kAggregation = 4;
constexpr std::size_t kProfileStarts = 3;

struct Data {
    std::vector<double> tau;
    std::vector<double> value;
    std::vector<double> error;
    double bin_width = 0.0;
    int aggregation = 1;
};

Data prepare(const NormalizedFringe& fringe) {
    const std::size_t n = fringe.centers.size();
    if (fringe.values.size() != n || fringe.errors.size() != n) {
        throw LengthMismatchError("fringe centers, values and errors differ in length");
    }
    Data d;
    d.bin_width = fringe.bin_width;
    const bool sparse =
        fringe.counts.size() == n &&
        std::any_of(fringe.counts.begin(), fringe.counts.end(),
                    [](double c) { return c < kAggregateBelowCounts; });
    if (!sparse) {
        d.tau = fringe.centers;
        d.value = fringe.values;
        d.error = fringe.errors;
    } else {
        d.aggregation = kAggregation;
        d.bin_width *= kAggregation;
        for (std::size_t i = 0; i < n; i += kAggregation) {
            const std::size_t end = std::min(n, i + kAggregation);
            const auto k = static_cast<double>(end - i);
            double t = 0, v = 0, e2 = 0;
            for (std::size_t j = i; j < end; ++j) {
                t += fringe.centers[j];
                v += fringe.values[j];
                e2 += fringe.errors[j] * fringe.errors[j];
            }
            d.tau.push_back(t / k);
            d.value.push_back(v / k);
            d.error.push_back(std::sqrt(e2) / k);
        }
    }
    // Empty bins carry zero Poisson error; give them the smallest nonzero one.
    double floor_error = std::numeric_limits<double>::infinity();
    for (const double e : d.error) {
        if (e > 0.0) floor_error = std::min(floor_error, e);
    }
    if (!std::isfinite(floor_error)) throw ConfigError("fringe has no nonzero bin errors");
    for (double& e : d.error) e = std::max(e, floor_error);
    return d;
}

double gamma_value(const FitModel& model, double tau_c, double w1, double w2, double tau) {
    switch (model.form) {
    case GammaForm::EffectiveLorentzian:
        return std::exp(-std::abs(tau) / tau_c);
    case GammaForm::Physical:
        return spectral::mutual_coherence(*model.lineshape_1, *model.lineshape_2, tau, model.sign);
    case GammaForm::PhysicalFree:
        return spectral::mutual_coherence(spectral::with_primary_width(*model.lineshape_1, w1),
                                          spectral::with_primary_width(*model.lineshape_2, w2), tau,
                                          model.sign);
    }
    return 0.0;
}

std::vector<double> moving_average(const std::vector<double>& x, std::size_t half) {
    std::vector<double> out(x.size());
    std::vector<double> prefix(x.size() + 1, 0.0);
    std::partial_sum(x.begin(), x.end(), prefix.begin() + 1);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(x.size(), i + half + 1);
        out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
    }
    return out;
}

double wing_mean(const Data& d) {
    double reach = 0.0;
    for (const double t : d.tau) reach = std::max(reach, std::abs(t));
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < d.tau.size(); ++i) {
        if (std::abs(d.tau[i]) >= 0.5 * reach) {
            sum += d.value[i];
            ++n;
        }
    }
    return n > 0 ? sum / static_cast<double>(n) : 1.0;
}

struct Guess {
    double baseline;
    double visibility;
    double tau_c;
};

Guess auto_guess(const Data& d, const FitInit& init) {
    Guess g{};
    g.baseline = init.baseline.value_or(wing_mean(d));
    const std::size_t half = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(5e-9 / d.bin_width)));
    const std::vector<double> smooth = moving_average(d.value, half);
    const double lowest = *std::min_element(smooth.begin(), smooth.end());
    g.visibility = init.visibility.value_or(std::clamp(1.0 - lowest / g.baseline, 0.0, 1.0));

    std::vector<double> deviation(d.value.size());
    for (std::size_t i = 0; i < d.value.size(); ++i) deviation[i] = std::abs(1.0 - d.value[i] / g.baseline);
    deviation = moving_average(deviation, half);
    // Outer envelope: max of the deviation at equal or larger |tau|.
    std::vector<std::size_t> order(d.tau.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return std::abs(d.tau[a]) > std::abs(d.tau[b]); });
    const double level = g.visibility / std::exp(1.0);
    double envelope = 0.0;
    double crossing = 0.0;
    for (const std::size_t i : order) {
        envelope = std::max(envelope, deviation[i]);
        if (envelope >= level) {
            crossing = std::abs(d.tau[i]);
            break;
        }
    }
    const double fallback = 100e-9;
    g.tau_c = init.tau_c.value_or(crossing > 2.0 * d.bin_width ? crossing : fallback);
    return g;
}

struct Layout {
    std::vector<std::string> names;
    std::vector<double> lower, upper, scale, start;
    int visibility = -1, tau_c = -1, width_1 = -1, width_2 = -1, delta_omega = -1, baseline = -1;

    int add(const std::string& name, double lo, double hi, double sc, double x0) {
        names.push_back(name);
        lower.push_back(lo);
        upper.push_back(hi);
        scale.push_back(sc);
        start.push_back(std::clamp(x0, lo, hi));
        return static_cast<int>(names.size()) - 1;
    }
};

struct Fixed {
    double tau_c = 0.0;
    double width_1 = 0.0;
    double width_2 = 0.0;
    double delta_omega = 0.0;
    double baseline = 1.0;
};

struct Unpacked {
    double visibility, tau_c, width_1, width_2, delta_omega, baseline;
};

Unpacked unpack(const Layout& layout, const Fixed& fixed, std::span<const double> x) {
    auto pick = [&](int index, double fallback) { return index >= 0 ? x[static_cast<std::size_t>(index)] : fallback; };
    return {x[static_cast<std::size_t>(layout.visibility)], pick(layout.tau_c, fixed.tau_c),
            pick(layout.width_1, fixed.width_1),         pick(layout.width_2, fixed.width_2),
            pick(layout.delta_omega, fixed.delta_omega), pick(layout.baseline, fixed.baseline)};
}

// Frequency candidates for the beat: the Fourier peak of (1 - values) near
// zero delay plus the best local minima of the chi^2 profile with V solved
// linearly at each trial frequency.
std::vector<double> delta_omega_candidates(const Data& d, const FitModel& model, const Guess& g,
                                           const Fixed& fixed, double omega_max) {
    std::vector<std::size_t> near;
    const double reach = std::max(6.0 * g.tau_c, 50.0 * d.bin_width);
    for (std::size_t i = 0; i < d.tau.size(); ++i) {
        if (std::abs(d.tau[i]) <= reach) near.push_back(i);
    }
    std::vector<double> gamma(near.size()), y(near.size()), w(near.size());
    for (std::size_t k = 0; k < near.size(); ++k) {
        const std::size_t i = near[k];
        gamma[k] = gamma_value(model, g.tau_c, fixed.width_1, fixed.width_2, d.tau[i]);
        y[k] = d.value[i] / g.baseline - 1.0;
        const double s = d.error[i] / g.baseline;
        w[k] = 1.0 / (s * s);
    }
    const double f_max = omega_max / (2.0 * kPi);
    const double df = 0.012 / g.tau_c;
    const auto steps = static_cast<std::size_t>(std::min(f_max, 25.0 / g.tau_c) / df) + 1;
    std::vector<double> gain(steps), fourier(steps);
    const double fourier_reach = 4.0 * g.tau_c;
    for (std::size_t s = 0; s < steps; ++s) {
        const double omega = 2.0 * kPi * df * static_cast<double>(s);
        double num = 0.0, den = 0.0;
        std::complex<double> transform{0.0, 0.0};
        for (std::size_t k = 0; k < near.size(); ++k) {
            const double tau = d.tau[near[k]];
            const double basis = gamma[k] * std::cos(omega * tau);
            num += w[k] * y[k] * basis;
            den += w[k] * basis * basis;
            if (std::abs(tau) <= fourier_reach) transform += -y[k] * std::polar(1.0, -omega * tau);
        }
        // V = -num/den must be positive for a dip.
        gain[s] = (den > 0.0 && num < 0.0) ? num * num / den : 0.0;
        fourier[s] = std::abs(transform);
    }
    std::vector<double> out;
    const auto peak = static_cast<std::size_t>(std::max_element(fourier.begin(), fourier.end()) - fourier.begin());
    out.push_back(2.0 * kPi * df * static_cast<double>(peak));
    std::vector<std::size_t> maxima;
    for (std::size_t s = 0; s < steps; ++s) {
        const bool left = s == 0 || gain[s] >= gain[s - 1];
        const bool right = s + 1 == steps || gain[s] > gain[s + 1];
        if (left && right && gain[s] > 0.0) maxima.push_back(s);
    }
    std::sort(maxima.begin(), maxima.end(), [&](std::size_t a, std::size_t b) { return gain[a] > gain[b]; });
    for (std::size_t k = 0; k < std::min(kProfileStarts, maxima.size()); ++k) {
        const double omega = 2.0 * kPi * df * static_cast<double>(maxima[k]);
        if (std::none_of(out.begin(), out.end(), [&](double o) { return std::abs(o - omega) < 0.5 * 2.0 * kPi * df; })) {
            out.push_back(omega);
        }
    }
    return out;
}

}  // namespace

std::string to_string(GammaForm form) {
    switch (form) {
    case GammaForm::EffectiveLorentzian:
        return "effective-lorentzian";
    case GammaForm::Physical:
        return "physical";
    case GammaForm::PhysicalFree:
        return "physical-free";
    }
    return "unknown";
}

GammaForm gamma_form_from_string(const std::string& name) {
    for (const auto form : {GammaForm::EffectiveLorentzian, GammaForm::Physical, GammaForm::PhysicalFree}) {
        if (to_string(form) == name) return form;
    }
    throw ConfigError(fmt::format(
        "unknown gamma form '{}' (expected effective-lorentzian, physical or physical-free)", name));
}

bool HomFit::has(const std::string& name) const {
    auto named = [&](const ParameterEstimate& p) { return p.name == name; };
    return std::any_of(parameters.begin(), parameters.end(), named) ||
           std::any_of(fixed.begin(), fixed.end(), named);
}

const ParameterEstimate& HomFit::get(const std::string& name) const {
    for (const auto& p : parameters) {
        if (p.name == name) return p;
    }
    for (const auto& p : fixed) {
        if (p.name == name) return p;
    }
    throw ConfigError(fmt::format("fit has no parameter '{}'", name));
}

double HomFit::evaluate(double tau) const {
    auto or_zero = [&](const char* name) { return has(name) ? value(name) : 0.0; };
    return fringe_curve(model, value("visibility"), or_zero("tau_c"), or_zero("width_1"),
                        or_zero("width_2"), or_zero("delta_omega"), value("baseline"), tau);
}

std::optional<double> HomFit::inverse_tau_c_hz() const {
    if (model.form != GammaForm::EffectiveLorentzian || !has("tau_c")) return std::nullopt;
    return 1.0 / value("tau_c");
}

double fringe_curve(const FitModel& model, double visibility, double tau_c, double width_1,
                    double width_2, double delta_omega, double baseline, double tau) {
    return baseline *
           (1.0 - visibility * gamma_value(model, tau_c, width_1, width_2, tau) * std::cos(delta_omega * tau));
}

HomFit fit_hom(const NormalizedFringe& fringe, const FitModel& model, const FitInit& init) {
    if (model.form != GammaForm::EffectiveLorentzian && (!model.lineshape_1 || !model.lineshape_2)) {
        throw ConfigError(fmt::format("gamma form '{}' requires both lineshapes", to_string(model.form)));
    }
    if (model.lineshape_1) spectral::validate(*model.lineshape_1);
    if (model.lineshape_2) spectral::validate(*model.lineshape_2);
    if (!(fringe.bin_width > 0.0)) throw ConfigError("fringe bin width must be positive");

    const Data data = prepare(fringe);
    const Guess guess = auto_guess(data, init);
    const double omega_max = kPi / fringe.bin_width;

    Fixed fixed;
    fixed.baseline = init.baseline.value_or(1.0);
    fixed.delta_omega = std::abs(model.delta_omega);
    fixed.tau_c = guess.tau_c;
    if (model.lineshape_1) fixed.width_1 = init.width_1.value_or(spectral::primary_width(*model.lineshape_1));
    if (model.lineshape_2) fixed.width_2 = init.width_2.value_or(spectral::primary_width(*model.lineshape_2));

    Layout layout;
    layout.visibility = layout.add("visibility", 0.0, 1.0, 1.0, guess.visibility);
    if (model.form == GammaForm::EffectiveLorentzian) {
        layout.tau_c = layout.add("tau_c", 0.1 * fringe.bin_width, 1e-3, 1e-7, guess.tau_c);
    } else if (model.form == GammaForm::PhysicalFree) {
        layout.width_1 = layout.add("width_1", 1e3, 1e10, 1e6, fixed.width_1);
        layout.width_2 = layout.add("width_2", 1e3, 1e10, 1e6, fixed.width_2);
    }
    if (model.fit_delta_omega) {
        layout.delta_omega = layout.add("delta_omega", 0.0, omega_max, 2.0 * kPi * 1e6, fixed.delta_omega);
    }
    if (model.fit_baseline) {
        layout.baseline = layout.add("baseline", 1e-6 * guess.baseline, 1e6 * guess.baseline, 1.0, guess.baseline);
    }

    const std::size_t n_params = layout.names.size();
    if (data.tau.size() < kBinsPerParameter * n_params) {
        throw ConfigError(fmt::format("fringe has {} bins; at least {} needed for {} free parameters",
                                      data.tau.size(), kBinsPerParameter * n_params, n_params));
    }

    lm::Problem problem;
    problem.names = layout.names;
    problem.lower = layout.lower;
    problem.upper = layout.upper;
    problem.scale = layout.scale;
    problem.residual_count = data.tau.size();
    problem.residuals = [&](std::span<const double> x, std::span<double> r) {
        const Unpacked p = unpack(layout, fixed, x);
        for (std::size_t i = 0; i < data.tau.size(); ++i) {
            const double m = fringe_curve(model, p.visibility, p.tau_c, p.width_1, p.width_2,
                                          p.delta_omega, p.baseline, data.tau[i]);
            r[i] = (data.value[i] - m) / data.error[i];
        }
    };

    std::vector<std::vector<double>> starts;
    if (model.fit_delta_omega && !init.delta_omega) {
        Guess scan_guess = guess;
        if (model.form != GammaForm::EffectiveLorentzian) scan_guess.tau_c = std::max(guess.tau_c, 10.0 * fringe.bin_width);
        for (const double omega : delta_omega_candidates(data, model, scan_guess, fixed, omega_max)) {
            std::vector<double> x = layout.start;
            x[static_cast<std::size_t>(layout.delta_omega)] = std::clamp(omega, 0.0, omega_max);
            starts.push_back(std::move(x));
        }
    } else {
        std::vector<double> x = layout.start;
        if (layout.delta_omega >= 0) x[static_cast<std::size_t>(layout.delta_omega)] = std::abs(*init.delta_omega);
        starts.push_back(std::move(x));
    }

    std::optional<lm::Result> best;
    std::exception_ptr failure;
    for (auto& x0 : starts) {
        try {
            lm::Result r = lm::solve(problem, x0);
            if (!best || r.chi2 < best->chi2) best = std::move(r);
        } catch (const ConvergenceError&) {
            failure = std::current_exception();
        }
    }
    if (!best) std::rethrow_exception(failure);

    HomFit fit;
    fit.model = model;
    fit.converged = true;
    fit.iterations = best->iterations;
    fit.aggregation = data.aggregation;
    fit.chi2 = best->chi2;
    fit.dof = data.tau.size() - n_params;
    fit.reduced_chi2 = fit.dof > 0 ? fit.chi2 / static_cast<double>(fit.dof) : 0.0;
    for (std::size_t j = 0; j < n_params; ++j) {
        fit.parameters.push_back({layout.names[j], best->parameters[j], best->sigma[j]});
    }
    auto hold = [&](int index, const char* name, double v) {
        if (index < 0) fit.fixed.push_back({name, v, 0.0});
    };
    if (model.form == GammaForm::Physical) {
        hold(-1, "width_1", fixed.width_1);
        hold(-1, "width_2", fixed.width_2);
    }
    hold(layout.delta_omega, "delta_omega", fixed.delta_omega);
    hold(layout.baseline, "baseline", fixed.baseline);

    fit.centers = data.tau;
    fit.residuals.resize(data.tau.size());
    problem.residuals(best->parameters, fit.residuals);
    return fit;
}

double locate_minimum(const NormalizedFringe& fringe, double half_range) {
    std::vector<double> t, v, w;
    for (std::size_t i = 0; i < fringe.centers.size(); ++i) {
        if (std::abs(fringe.centers[i]) <= half_range) {
            t.push_back(fringe.centers[i]);
            v.push_back(fringe.values[i]);
            const double e = fringe.errors[i] > 0.0 ? fringe.errors[i] : 1.0;
            w.push_back(1.0 / (e * e));
        }
    }
    if (t.size() < 8) throw ConfigError("too few bins inside the minimum search range");
    // v ~ a + b |t - t0| + c (t - t0)^2, linear in (a, b, c) for each trial t0.
    const double step = 0.1 * fringe.bin_width;
    const auto trials = static_cast<int>(std::floor(0.5 * half_range / step));
    double best_t0 = 0.0;
    double best_chi2 = std::numeric_limits<double>::infinity();
    for (int k = -trials; k <= trials; ++k) {
        const double t0 = k * step;
        double s[3][3] = {};
        double rhs[3] = {};
        double yy = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double u = (t[i] - t0) / half_range;
            const double basis[3] = {1.0, std::abs(u), u * u};
            for (int r = 0; r < 3; ++r) {
                rhs[r] += w[i] * basis[r] * v[i];
                for (int c = 0; c < 3; ++c) s[r][c] += w[i] * basis[r] * basis[c];
            }
            yy += w[i] * v[i] * v[i];
        }
        // 3x3 solve by Cramer's rule.
        auto det3 = [](const double m[3][3]) {
            return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                   m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                   m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        };
        const double det = det3(s);
        if (std::abs(det) < 1e-300) continue;
        double coef[3];
        for (int c = 0; c < 3; ++c) {
            double m[3][3];
            for (int r = 0; r < 3; ++r) {
                for (int q = 0; q < 3; ++q) m[r][q] = q == c ? rhs[r] : s[r][q];
            }
            coef[c] = det3(m) / det;
        }
        const double chi2 = yy - (coef[0] * rhs[0] + coef[1] * rhs[1] + coef[2] * rhs[2]);
        if (chi2 < best_chi2) {
            best_chi2 = chi2;
            best_t0 = t0;
        }
    }
    return best_t0;
}

Comparison mc_vs_analytic(const NormalizedFringe& fringe, const spectral::FringeModel& model) {
    Comparison c;
    double sum = 0.0;
    for (std::size_t i = 0; i < fringe.centers.size(); ++i) {
        if (!(fringe.errors[i] > 0.0)) continue;
        const double z = (fringe.values[i] - spectral::coincidence_probability(model, fringe.centers[i])) /
                         fringe.errors[i];
        sum += z * z;
        c.max_abs_z = std::max(c.max_abs_z, std::abs(z));
        ++c.bins;
    }
    c.reduced_chi2 = c.bins > 0 ? sum / static_cast<double>(c.bins) : 0.0;
    return c;
}

}  // namespace cwhom::analysis
