#include <benchmark/benchmark.h>

#include <random>

#include <noisy/dynamics.hpp>
#include <noisy/measures.hpp>
#include <noisy/response.hpp>
#include <noisy/transfer.hpp>

using namespace noisy;

namespace {

constexpr double kXi1 = 0.860e-2;

AssembledSystem bz_system(std::size_t n) { return assemble(SystemSpec{make_bz_map(), uniform_kernel(kXi1), Grid(n)}); }

GridDensity random_zero_mass(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    GridDensity f{Grid(n)};
    for (std::size_t k = 0; k < n; ++k) f[k] = u(rng);
    return project_zero_average(f);
}

void BM_UlamAssemblyBZ(benchmark::State& state) {
    const MapModel T = make_bz_map();
    const Grid g(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(ulam_matrix(T, g));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_UlamAssemblyBZ)->RangeMultiplier(4)->Range(256, 4096)->Unit(benchmark::kMillisecond);

void BM_ConvolutionAssembly(benchmark::State& state) {
    const NoiseKernel k = uniform_kernel(kXi1);
    const Grid g(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(convolution_matrix(k, g, BoundaryMode::Reflecting));
}
BENCHMARK(BM_ConvolutionAssembly)->RangeMultiplier(4)->Range(256, 16384)->Unit(benchmark::kMillisecond);

void BM_AnnealedApply(benchmark::State& state) {
    const AssembledSystem sys = bz_system(static_cast<std::size_t>(state.range(0)));
    const GridDensity f = GridDensity::uniform(sys.grid());
    for (auto _ : state) benchmark::DoNotOptimize(sys.annealed.apply(f));
    state.counters["nonzeros"] = static_cast<double>(sys.annealed.nonzeros());
}
BENCHMARK(BM_AnnealedApply)->RangeMultiplier(4)->Range(256, 16384);

void BM_StationaryBZ(benchmark::State& state) {
    const AssembledSystem sys = bz_system(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(stationary_density(sys.annealed));
}
BENCHMARK(BM_StationaryBZ)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_MixingUpper(benchmark::State& state) {
    const AssembledSystem sys = bz_system(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(mixing_contraction(sys.annealed, 55, 0));
}
BENCHMARK(BM_MixingUpper)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_Resolvent(benchmark::State& state) {
    const AssembledSystem sys = bz_system(static_cast<std::size_t>(state.range(0)));
    const GridDensity g = random_zero_mass(sys.grid().size(), 1);
    for (auto _ : state) benchmark::DoNotOptimize(resolvent_apply(sys.annealed, g));
}
BENCHMARK(BM_Resolvent)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_WassersteinNorm(benchmark::State& state) {
    const GridDensity f = random_zero_mass(static_cast<std::size_t>(state.range(0)), 2);
    for (auto _ : state) benchmark::DoNotOptimize(wasserstein_norm(f));
}
BENCHMARK(BM_WassersteinNorm)->RangeMultiplier(8)->Range(64, 32768);

}  // namespace

BENCHMARK_MAIN();
