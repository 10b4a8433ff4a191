#include <cmath>
#include <complex>
#include <memory>
#include <numeric>

#include <fftw3.h>
#include <fmt/format.h>

#include "cwhom/errors.hpp"
#include "cwhom/spectral.hpp"

namespace cwhom::spectral {
namespace {

struct FftwDeleter {
    void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwDeleter>;

FftwBuffer allocate(std::size_t n) {
    return FftwBuffer(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
}

}  // namespace

FrequencyGrid sample_psd(const Lineshape& shape, double half_span, std::size_t n) {
    if (n < 2 || !(half_span > 0.0)) throw ConfigError("oracle grid needs n >= 2 and half_span > 0");
    FrequencyGrid grid{-half_span, 2.0 * half_span / static_cast<double>(n), {}};
    grid.density.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        grid.density[i] = lineshape_psd(shape, grid.f_start + grid.df * static_cast<double>(i));
    }
    return grid;
}

TimeSeries psd_to_g1_numeric(const FrequencyGrid& grid, double nominal_width) {
    const std::size_t n = grid.density.size();
    if (n < 2 || !(grid.df > 0.0)) throw InsufficientSpanError("frequency grid is empty");
    const double span = grid.df * static_cast<double>(n);
    if (span < 20.0 * nominal_width) {
        throw InsufficientSpanError(
            fmt::format("grid span {} Hz is below 20x the lineshape width {} Hz", span, nominal_width));
    }
    const double area = std::accumulate(grid.density.begin(), grid.density.end(), 0.0) * grid.df;
    if (std::abs(area - 1.0) > 1e-3) {
        throw InsufficientSpanError(
            fmt::format("sampled PSD integrates to {}, not 1 within 1e-3; widen the grid", area));
    }

    auto in = allocate(n);
    auto out = allocate(n);
    for (std::size_t i = 0; i < n; ++i) {
        in[i][0] = grid.density[i];
        in[i][1] = 0.0;
    }
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), in.get(), out.get(), FFTW_BACKWARD,
                                      FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);

    // g1(tau_k) = df * exp(i 2 pi f_start tau_k) * sum_m S_m exp(i 2 pi m k / n)
    const double dtau = 1.0 / span;
    const auto half = static_cast<std::ptrdiff_t>(n / 2);
    TimeSeries result;
    result.tau.resize(n);
    result.value.resize(n);
    for (std::ptrdiff_t k = -half; k < static_cast<std::ptrdiff_t>(n) - half; ++k) {
        const auto idx = static_cast<std::size_t>((k + static_cast<std::ptrdiff_t>(n)) %
                                                  static_cast<std::ptrdiff_t>(n));
        const double tau = static_cast<double>(k) * dtau;
        const std::complex<double> sum(out[idx][0], out[idx][1]);
        const std::complex<double> phase =
            std::polar(1.0, 2.0 * kPi * std::fmod(grid.f_start * tau, 1.0));
        const auto slot = static_cast<std::size_t>(k + half);
        result.tau[slot] = tau;
        result.value[slot] = (grid.df * phase * sum).real();
    }
    return result;
}

std::string grid_to_csv(const FrequencyGrid& grid) {
    std::string csv = "frequency_Hz,density_per_Hz\n";
    for (std::size_t i = 0; i < grid.density.size(); ++i) {
        csv += fmt::format("{:.10g},{:.10g}\n", grid.f_start + grid.df * static_cast<double>(i),
                           grid.density[i]);
    }
    return csv;
}

}  // namespace cwhom::spectral
