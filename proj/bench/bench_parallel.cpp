// Serial reference vs OpenMP kernels: reservoir grid search and candidate fits.
#include "emlrom/cascade.hpp"
#include "emlrom/io.hpp"
#include "emlrom/pipeline.hpp"
#include "emlrom/toybench.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

using namespace emlrom;

namespace {

const Trace& network()
{
    static const Trace t = [] {
        RunConfig c;
        c.command = Command::CascadeBench;
        return network_trace(c);
    }();
    return t;
}

ReservoirGrid small_grid()
{
    return {linspace(0.15, 0.80, 6), linspace(0.5, 5.5, 6)};
}

const std::vector<Trace>& overshoot()
{
    static const auto t = ingest_trace(std::string(EMLROM_SOURCE_DIR) + "/data/overshoot.csv");
    return t;
}

SearchSettings small_search()
{
    SearchSettings s;
    s.grammar = {BlockKind::Eml, 2, 4};
    s.n_starts = 8;
    return s;
}

void BM_GridSerial(benchmark::State& st)
{
    const auto g = small_grid();
    for (auto _ : st)
        benchmark::DoNotOptimize(reservoir_grid_search_serial(network(), 10, g));
}

void BM_GridParallel(benchmark::State& st)
{
    const auto g = small_grid();
    omp_set_num_threads(static_cast<int>(st.range(0)));
    for (auto _ : st)
        benchmark::DoNotOptimize(reservoir_grid_search(network(), 10, g));
}

void BM_FitSerial(benchmark::State& st)
{
    const auto s = small_search();
    const auto cands = enumerate(s.grammar);
    for (auto _ : st)
        benchmark::DoNotOptimize(fit_candidates_serial(cands, s, overshoot()));
}

void BM_FitParallel(benchmark::State& st)
{
    const auto s = small_search();
    const auto cands = enumerate(s.grammar);
    omp_set_num_threads(static_cast<int>(st.range(0)));
    for (auto _ : st)
        benchmark::DoNotOptimize(fit_candidates(cands, s, overshoot()));
}

} // namespace

BENCHMARK(BM_GridSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GridParallel)->DenseRange(1, 4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_FitSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_FitParallel)->DenseRange(1, 4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
