#pragma once

// Parameter extraction: weighted least-squares fits of normalized fringes to
// 1 - V*Gamma(dT)*cos(dw*dT), beat-note spectra of synthesized fields, and
// Monte Carlo versus analytic comparisons.

#include <optional>
#include <string>
#include <vector>

#include "cwhom/correlator.hpp"
#include "cwhom/lasersim.hpp"
#include "cwhom/spectral.hpp"

namespace cwhom::analysis {

using correlator::NormalizedFringe;
using spectral::CoherenceSign;
using spectral::Lineshape;

enum class GammaForm {
    EffectiveLorentzian,  ///< Gamma = exp(-|tau|/tau_c), tau_c free
    Physical,             ///< Gamma from two fixed lineshapes
    PhysicalFree,         ///< lineshape primary widths free
};

std::string to_string(GammaForm form);
GammaForm gamma_form_from_string(const std::string& name);

struct FitModel {
    GammaForm form = GammaForm::EffectiveLorentzian;
    std::optional<Lineshape> lineshape_1;  ///< required for the physical forms
    std::optional<Lineshape> lineshape_2;
    bool fit_delta_omega = false;
    double delta_omega = 0.0;  ///< rad/s; start value when free, fixed value otherwise
    bool fit_baseline = true;
    CoherenceSign sign = CoherenceSign::Envelope;
};

/// Optional start values; absent entries are auto-initialized.
struct FitInit {
    std::optional<double> visibility;
    std::optional<double> tau_c;
    std::optional<double> delta_omega;
    std::optional<double> baseline;
    std::optional<double> width_1;
    std::optional<double> width_2;
};

struct ParameterEstimate {
    std::string name;
    double value;
    double sigma;
};

struct HomFit {
    FitModel model;
    std::vector<ParameterEstimate> parameters;  ///< free parameters
    std::vector<ParameterEstimate> fixed;       ///< held parameters, sigma 0
    double chi2 = 0.0;
    std::size_t dof = 0;
    double reduced_chi2 = 0.0;
    std::vector<double> centers;    ///< bins actually fitted (after aggregation)
    std::vector<double> residuals;  ///< (value - model) / error per fitted bin
    bool converged = false;
    int iterations = 0;
    int aggregation = 1;  ///< bins merged per fitted bin
    /// Sign of dw cannot be identified from a symmetric fringe; reported
    /// value is |dw|.
    bool delta_omega_sign_known = false;

    /// Looks up free parameters first, then fixed ones.
    bool has(const std::string& name) const;
    const ParameterEstimate& get(const std::string& name) const;
    double value(const std::string& name) const { return get(name).value; }
    double sigma(const std::string& name) const { return get(name).sigma; }

    /// Fitted curve (including baseline) at delay tau.
    double evaluate(double tau) const;
    /// Effective bandwidth under the width = 1/bandwidth convention, from
    /// tau_c (effective-lorentzian fits only).
    std::optional<double> inverse_tau_c_hz() const;
};

/// Weighted Levenberg-Marquardt fit. Throws ConfigError when the fringe has
/// fewer than 10 bins per free parameter, RankDeficientError when a free
/// parameter is unidentifiable, ConvergenceError on non-convergence.
HomFit fit_hom(const NormalizedFringe& fringe, const FitModel& model, const FitInit& init = {});

/// Curve value for explicit parameters; shared by fit and report code.
double fringe_curve(const FitModel& model, double visibility, double tau_c, double width_1,
                    double width_2, double delta_omega, double baseline, double tau);

/// Parabola-plus-cusp estimate of where the dip bottoms out, searched within
/// +/- half_range of zero.
double locate_minimum(const NormalizedFringe& fringe, double half_range);

struct PsdEstimate {
    std::vector<double> frequency;  ///< Hz, ascending
    std::vector<double> density;    ///< 1/Hz
    double df = 0.0;
    std::size_t segments = 0;
};

/// Welch estimate (Hann window) of the spectrum of e1(t)*conj(e2(t)).
/// Throws LengthMismatchError for unequal streams, TooFewSegmentsError for
/// fewer than 20 segments.
PsdEstimate beat_psd(const lasersim::FieldStream& field_1, const lasersim::FieldStream& field_2,
                     std::size_t segment_length, double overlap = 0.5);

/// Unit field of constant phase at `detuning`, used as a zero-linewidth
/// reference for beat spectra.
lasersim::FieldStream monochromatic_field(std::size_t samples, double dt, double detuning = 0.0);

double psd_area(const PsdEstimate& psd);

struct PsdWidth {
    double fwhm = 0.0;
    double peak_frequency = 0.0;
    /// FWHM divided by the full width at 10% of maximum: ~1 for a flat top,
    /// 1/3 for a Lorentzian, 0.55 for a Gaussian.
    double shape_factor = 0.0;
};

/// FWHM by linear interpolation at half maximum, measured on a light moving
/// average once the lobe spans many grid steps. Throws AmbiguousWidthError
/// when more than one lobe rises above half maximum.
PsdWidth psd_width(const PsdEstimate& psd);

std::string psd_to_csv(const PsdEstimate& psd);

struct Comparison {
    double reduced_chi2 = 0.0;
    double max_abs_z = 0.0;
    std::size_t bins = 0;
};

/// Per-bin z-scores of a measured fringe against a fully specified model.
Comparison mc_vs_analytic(const NormalizedFringe& fringe, const spectral::FringeModel& model);

}  // namespace cwhom::analysis
