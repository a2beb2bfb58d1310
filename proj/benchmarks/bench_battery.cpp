#include <benchmark/benchmark.h>

#include "stes/eventstudy.hpp"
#include "stes/pipeline.hpp"
#include "stes/simgen.hpp"

namespace {

stes::AbnormalPanel make_abnormal(int n_stations, int tau0, int tau1) {
    stes::SimConfig cfg;
    cfg.n_stations = n_stations;
    cfg.tau0 = tau0;
    cfg.tau1 = tau1;
    cfg.n_covariates = 2;
    cfg.params.beta = Eigen::Vector3d(1.0, 0.5, -0.5);
    cfg.params.g = 0.3;
    cfg.params.nu = 1.0;
    cfg.params.theta = 40.0;
    cfg.params.sigma2_eps = 1.0;
    cfg.seed = 7;
    const stes::SimulatedPanel sim = stes::simulate_panel(cfg);
    const stes::NormalModelResult fit =
        stes::fit_normal_model(sim.panel, sim.split, stes::ModelKind::lm);
    return stes::compute_abnormal(sim.panel, fit.normal_values, sim.split);
}

}  // namespace

static void BM_FullBattery(benchmark::State& state) {
    const stes::AbnormalPanel abn =
        make_abnormal(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 70);
    for (auto _ : state) {
        benchmark::DoNotOptimize(stes::run_battery(abn));
    }
}
BENCHMARK(BM_FullBattery)->Args({10, 200})->Args({83, 798})->Unit(benchmark::kMillisecond);

static void BM_RankFamilies(benchmark::State& state) {
    const stes::AbnormalPanel abn = make_abnormal(83, 798, 70);
    for (auto _ : state) {
        benchmark::DoNotOptimize(stes::corrado_family(abn));
        benchmark::DoNotOptimize(stes::grank_family(abn));
    }
}
BENCHMARK(BM_RankFamilies)->Unit(benchmark::kMillisecond);
