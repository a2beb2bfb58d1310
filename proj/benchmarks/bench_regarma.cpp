#include <benchmark/benchmark.h>

#include <random>

#include "stes/baselines.hpp"

namespace {

struct Series {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;
};

Series make_series(int n) {
    std::mt19937 rng(5);
    std::normal_distribution<double> gauss;
    Series s;
    s.x.resize(n, 3);
    s.y.resize(n);
    double u = 0.0, e_prev = 0.0;
    for (int t = 0; t < n; ++t) {
        s.x(t, 0) = 1.0;
        s.x(t, 1) = gauss(rng);
        s.x(t, 2) = gauss(rng);
        const double e = gauss(rng);
        u = 0.6 * u + e + 0.3 * e_prev;
        e_prev = e;
        s.y(t) = 1.0 + 0.5 * s.x(t, 1) - 0.5 * s.x(t, 2) + u;
    }
    return s;
}

}  // namespace

static void BM_FitRegarma11(benchmark::State& state) {
    const Series s = make_series(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(stes::fit_regarma(s.y, s.x, stes::ArmaOrder{1, 1}));
    }
}
BENCHMARK(BM_FitRegarma11)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);

static void BM_SelectOrderSmallGrid(benchmark::State& state) {
    const Series s = make_series(400);
    for (auto _ : state) {
        benchmark::DoNotOptimize(stes::select_order_aicc(s.y, s.x, 3, 3));
    }
}
BENCHMARK(BM_SelectOrderSmallGrid)->Unit(benchmark::kMillisecond);
