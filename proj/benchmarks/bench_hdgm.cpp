#include <benchmark/benchmark.h>

#include "stes/hdgm.hpp"
#include "stes/simgen.hpp"

namespace {

stes::SimulatedPanel make_panel(int n_stations, int tau0) {
    stes::SimConfig cfg;
    cfg.n_stations = n_stations;
    cfg.tau0 = tau0;
    cfg.tau1 = 20;
    cfg.n_covariates = 3;
    cfg.params.beta = Eigen::VectorXd::LinSpaced(4, 2.0, -1.0);
    cfg.params.g = 0.7;
    cfg.params.nu = 1.5;
    cfg.params.theta = 35.0;
    cfg.params.sigma2_eps = 1.0;
    cfg.seed = 42;
    return stes::simulate_panel(cfg);
}

}  // namespace

static void BM_KalmanLoglik(benchmark::State& state) {
    const auto sim = make_panel(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(stes::kalman_loglik(sim.panel, sim.split, sim.truth));
    }
}
BENCHMARK(BM_KalmanLoglik)->Args({10, 200})->Args({40, 400})->Args({83, 800})
    ->Unit(benchmark::kMillisecond);

static void BM_KalmanSmooth(benchmark::State& state) {
    const auto sim = make_panel(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(stes::kalman_smooth(sim.panel, sim.split, sim.truth));
    }
}
BENCHMARK(BM_KalmanSmooth)->Args({10, 200})->Args({40, 400})->Unit(benchmark::kMillisecond);

static void BM_EmUpdate(benchmark::State& state) {
    const auto sim = make_panel(20, 400);
    stes::HdgmFitOptions options;
    options.max_iter = 2;  // one full EM update per fit call
    const stes::HdgmParams init = stes::hdgm_default_init(sim.panel, sim.split);
    for (auto _ : state) {
        benchmark::DoNotOptimize(stes::em_fit(sim.panel, sim.split, init, options));
    }
}
BENCHMARK(BM_EmUpdate)->Unit(benchmark::kMillisecond);
