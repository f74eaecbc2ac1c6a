#include <benchmark/benchmark.h>

#include "survproc/density.hpp"
#include "survproc/exposure.hpp"
#include "survproc/likelihood.hpp"
#include "survproc/simulate.hpp"

using namespace survproc;

namespace {

ModelParams bench_model() {
    ModelParams mp;
    mp.survival = {Family::weibull, {1.5, 10.0}};
    mp.mean.alpha = {0.1};
    mp.mean.m0 = LogLinearCurve{2.0, 0.0};
    mp.mean.beta = {0.0, 1.0};
    mp.cov = {1.0, KernelType::exponential, 2.0, 1.0, 0.25};
    return mp;
}

} // namespace

static void BM_dataset_loglik(benchmark::State& state) {
    const ModelParams mp = bench_model();
    const Dataset ds = simulate_fixed_dataset(static_cast<std::size_t>(state.range(0)),
                                              FixedSchedule::regular(12.0, 0.25), mp, 1);
    const QuadratureConfig qc;
    for (auto _ : state) {
        benchmark::DoNotOptimize(dataset_loglik(ds, mp, qc, 1));
    }
}
BENCHMARK(BM_dataset_loglik)->Arg(50)->Arg(200);

static void BM_marginal_density(benchmark::State& state) {
    const ModelParams mp = bench_model();
    const QuadratureConfig qc;
    const std::vector<double> ts{0.5, 2.0, 4.0};
    const std::vector<double> y{1.5, 2.0, 1.0};
    for (auto _ : state) {
        benchmark::DoNotOptimize(marginal_density(ts, y, 0, mp, qc));
    }
}
BENCHMARK(BM_marginal_density);

static void BM_conditional_sample(benchmark::State& state) {
    const ModelParams mp = bench_model();
    std::vector<double> ts;
    for (double s = 0.0; s < 12.0; s += 0.25) ts.push_back(s);
    Philox rng(3, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_conditional(ts, 12.5, 0, mp.mean, mp.cov, rng));
    }
}
BENCHMARK(BM_conditional_sample);

static void BM_simulate_fixed(benchmark::State& state) {
    const ModelParams mp = bench_model();
    const FixedSchedule sched = FixedSchedule::regular(12.0, 0.25);
    std::uint64_t i = 0;
    for (auto _ : state) {
        Philox rng(5, i++);
        benchmark::DoNotOptimize(simulate_fixed(sched, 0, mp, rng, "P"));
    }
}
BENCHMARK(BM_simulate_fixed);

static void BM_mc_survivor(benchmark::State& state) {
    ExposureModel em;
    em.k0 = {KernelType::exponential, 0.5, 1.0};
    em.link = {HazardLink::Type::loglinear, std::log(0.3), 0.5};
    MCConfig mc;
    mc.n_paths = static_cast<int>(state.range(0));
    mc.grid_dt = 0.02;
    mc.seed = 7;
    const std::vector<double> ts{0.5, 1.5};
    const std::vector<double> x{0.3, -0.2};
    for (auto _ : state) {
        benchmark::DoNotOptimize(survivor_given_exposure(ts, x, 2.0, em, mc));
    }
}
BENCHMARK(BM_mc_survivor)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
