#include "timeemb/spectral.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

timeemb::RealArray random_window(std::size_t l, std::size_t d) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> dist;
    timeemb::RealArray x({l, d});
    for (double& v : x.storage()) v = dist(rng);
    return x;
}

void BM_RealFftRow(benchmark::State& state) {
    const auto l = static_cast<std::size_t>(state.range(0));
    const auto x = random_window(l, 1);
    const auto& plan = timeemb::real_fft(l);
    std::vector<double> re(plan.bins()), im(plan.bins());
    for (auto _ : state) {
        plan.forward(x.values(), re, im);
        benchmark::DoNotOptimize(re.data());
    }
}
BENCHMARK(BM_RealFftRow)->Arg(96)->Arg(336)->Arg(337)->Arg(720);

void BM_ForwardInverseWindow(benchmark::State& state) {
    const auto x = random_window(static_cast<std::size_t>(state.range(0)), 7);
    for (auto _ : state) benchmark::DoNotOptimize(timeemb::inverse_rfft(timeemb::forward_rfft(x)));
}
BENCHMARK(BM_ForwardInverseWindow)->Arg(96)->Arg(720);

void BM_CircularConvolveDirect(benchmark::State& state) {
    const auto l = static_cast<std::size_t>(state.range(0));
    const auto x = random_window(l, 1), h = random_window(l, 1);
    for (auto _ : state) benchmark::DoNotOptimize(timeemb::circular_convolve(x.values(), h.values()));
}
BENCHMARK(BM_CircularConvolveDirect)->Arg(96)->Arg(720);

} // namespace
