#include <random>

#include <benchmark/benchmark.h>

#include "cwhom/analysis.hpp"
#include "cwhom/correlator.hpp"
#include "cwhom/lasersim.hpp"

namespace {

std::vector<cwhom::lasersim::TimestampPs> poisson_stream(double rate, double duration, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> gap(rate);
    std::vector<cwhom::lasersim::TimestampPs> out;
    for (double t = gap(rng); t < duration; t += gap(rng)) out.push_back(std::llround(t * 1e12));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void BM_Correlate(benchmark::State& state) {
    const double rate = static_cast<double>(state.range(0));
    const auto a = poisson_stream(rate, 0.1, 1);
    const auto b = poisson_stream(rate, 0.1, 2);
    const cwhom::correlator::HistogramSpec spec(0.5e-9, 2e-6);
    for (auto _ : state) benchmark::DoNotOptimize(cwhom::correlator::correlate(a, b, spec, 0.1));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(a.size() + b.size()));
}
BENCHMARK(BM_Correlate)->Arg(500000)->Arg(2000000)->Unit(benchmark::kMillisecond);

void BM_FieldSynthesis(benchmark::State& state) {
    cwhom::lasersim::SourceSpec s;
    s.lineshape = cwhom::spectral::FMTriangle{1.2e6, 1e3, 5e6};
    cwhom::lasersim::FieldSynthesizer synth(s, 2e-9, 0.0, 3);
    std::vector<double> phase(1 << 16);
    for (auto _ : state) {
        synth.generate_phase(phase);
        benchmark::DoNotOptimize(phase.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(phase.size()));
}
BENCHMARK(BM_FieldSynthesis);

void BM_RunExperiment(benchmark::State& state) {
    cwhom::lasersim::ExperimentConfig c;
    c.source_1.lineshape = cwhom::spectral::FMTriangle{1.2e6, 1e3, 5e6};
    c.source_2.lineshape = cwhom::spectral::Lorentzian{2.2e6};
    c.duration = 0.01;
    c.segment_duration = 0.01;
    for (auto _ : state) benchmark::DoNotOptimize(cwhom::lasersim::run_experiment(c));
    state.SetItemsProcessed(state.iterations() * 5000000);
}
BENCHMARK(BM_RunExperiment)->Unit(benchmark::kMillisecond);

void BM_FitHom(benchmark::State& state) {
    std::mt19937_64 rng(4);
    cwhom::correlator::NormalizedFringe f;
    f.bin_width = 0.5e-9;
    for (int k = -4000; k <= 4000; ++k) {
        const double tau = k * 0.5e-9;
        const double expected = 500.0 * (1.0 - 0.43 * std::exp(-std::abs(tau) / 65e-9));
        const double c = static_cast<double>(std::poisson_distribution<long long>(expected)(rng));
        f.centers.push_back(tau);
        f.counts.push_back(c);
        f.values.push_back(c / 500.0);
        f.errors.push_back(std::sqrt(c) / 500.0);
    }
    for (auto _ : state) benchmark::DoNotOptimize(cwhom::analysis::fit_hom(f, {}));
}
BENCHMARK(BM_FitHom)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
