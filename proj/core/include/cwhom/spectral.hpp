#pragma once

// Analytic coherence math for two independent narrowband sources: lineshapes,
// first-order field correlations, the mutual coherence envelope and the
// time-resolved coincidence probability 1 - V*Gamma(dT)*cos(dw*dT).

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cwhom::spectral {

inline constexpr double kPi = 3.14159265358979323846;

struct Lorentzian {
    double fwhm;  // Hz
};

struct Rectangular {
    double width;  // Hz
};

struct Gaussian {
    double fwhm;  // Hz
};

/// Triangular frequency sweep of peak-to-peak `deviation` at `mod_rate`, on top
/// of an intrinsic Lorentzian of width `intrinsic_fwhm`.
struct FMTriangle {
    double intrinsic_fwhm;  // Hz
    double mod_rate;        // Hz
    double deviation;       // Hz, peak to peak
};

using Lineshape = std::variant<Lorentzian, Rectangular, Gaussian, FMTriangle>;

/// Throws ConfigError unless every frequency parameter is strictly positive
/// and finite.
void validate(const Lineshape& shape);

/// Throws AdiabaticApproximationError for an FM lineshape whose modulation
/// rate exceeds deviation/100.
void require_adiabatic(const Lineshape& shape);

std::string kind_name(const Lineshape& shape);
std::string describe(const Lineshape& shape);

/// Frequency range the spectrum occupies, used for sampling-rate checks.
double spectral_extent(const Lineshape& shape);

/// Primary width parameter (fwhm, width or FM deviation) and its setter.
double primary_width(const Lineshape& shape);
Lineshape with_primary_width(const Lineshape& shape, double width);

/// Normalized first-order field autocorrelation of the zero-centred
/// lineshape. Even in tau, g1(0) = 1.
double g1(const Lineshape& shape, double tau);

/// Unit-area power spectral density at frequency offset f (1/Hz).
double lineshape_psd(const Lineshape& shape, double f);

enum class CoherenceSign {
    Envelope,  ///< |g1 * g1|
    Signed,    ///< g1 * g1, keeps the sinc sign flips
};

double mutual_coherence(const Lineshape& l1, const Lineshape& l2, double tau,
                        CoherenceSign sign = CoherenceSign::Envelope);

class FringeModel {
public:
    /// Throws ConfigError when V is outside [0, 1], or above 0.5 while the
    /// classical flag is set.
    FringeModel(double visibility, Lineshape l1, Lineshape l2, double delta_omega,
                bool classical = true, CoherenceSign sign = CoherenceSign::Envelope);

    double visibility() const noexcept { return visibility_; }
    const Lineshape& lineshape_1() const noexcept { return l1_; }
    const Lineshape& lineshape_2() const noexcept { return l2_; }
    double delta_omega() const noexcept { return delta_omega_; }
    bool classical() const noexcept { return classical_; }
    CoherenceSign sign() const noexcept { return sign_; }

    double gamma(double tau) const { return mutual_coherence(l1_, l2_, tau, sign_); }

private:
    double visibility_;
    Lineshape l1_;
    Lineshape l2_;
    double delta_omega_;
    bool classical_;
    CoherenceSign sign_;
};

/// 1 - V*Gamma12(dT)*cos(dw*dT); baseline 1 at large |dT|.
double coincidence_probability(const FringeModel& model, double delta_t);

struct FringeMetrics {
    double depth;                  ///< 1 - P(0) = V
    double dip_fwhm;               ///< full width of the envelope dip at half depth, s
    double coherence_half_width;   ///< tau > 0 where Gamma first falls to 1/e, s
    std::vector<double> beat_nodes;  ///< first zeros of cos(dw*dT), +/-; empty for dw = 0
    double inverse_fwhm_hz;        ///< 1 / dip_fwhm
    double inverse_coherence_hz;   ///< 1 / coherence_half_width
    double lorentzian_equivalent_hz;  ///< 1 / (pi * coherence_half_width)
};

/// Throws MetricUnavailableError when V = 0 or a crossing is not found within
/// 10 us.
FringeMetrics fringe_metrics(const FringeModel& model);

// Numeric Fourier oracle -----------------------------------------------------

struct FrequencyGrid {
    double f_start;  ///< frequency of the first sample, Hz
    double df;       ///< grid step, Hz
    std::vector<double> density;  ///< 1/Hz
};

struct TimeSeries {
    std::vector<double> tau;
    std::vector<double> value;
};

inline constexpr std::size_t kOracleGridPoints = std::size_t{1} << 20;
inline constexpr double kOracleHalfSpan = 110e6;

/// Samples lineshape_psd on n points symmetric about zero covering +/- half_span.
FrequencyGrid sample_psd(const Lineshape& shape, double half_span = kOracleHalfSpan,
                         std::size_t n = kOracleGridPoints);

/// Discrete Fourier transform of sampled PSD onto the conjugate time grid
/// tau_k = k / (n*df), k in [-n/2, n/2). `nominal_width` is the spectral
/// width the grid must cover 20 times over. Throws InsufficientSpanError when
/// the span is too narrow or the samples do not integrate to 1 within 1e-3.
TimeSeries psd_to_g1_numeric(const FrequencyGrid& grid, double nominal_width);

/// Two-column CSV: frequency_Hz,density_per_Hz.
std::string grid_to_csv(const FrequencyGrid& grid);

}  // namespace cwhom::spectral
