#include "timeemb/model.hpp"
#include "timeemb/train.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

timeemb::Batch random_batch(const timeemb::ModelConfig& c, std::size_t n) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> dist;
    timeemb::Batch b{timeemb::RealArray({n, c.lookback, c.channels}), timeemb::RealArray({n, c.horizon, c.channels}),
                     {}};
    for (double& v : b.x.storage()) v = dist(rng);
    for (double& v : b.y.storage()) v = dist(rng);
    for (std::size_t i = 0; i < n; ++i) b.t_last.push_back(rng() % 100000);
    return b;
}

// One optimizer-free training step on the default ETTh1 shape.
void BM_TrainStep(benchmark::State& state) {
    timeemb::ModelConfig c;
    auto model = timeemb::TimeEmbModel::create(c, 0);
    const auto batch = random_batch(c, static_cast<std::size_t>(state.range(0)));
    const auto params = model.trainable();
    for (auto _ : state) {
        benchmark::DoNotOptimize(timeemb::evaluate_with_gradients(params, [&](timeemb::Graph& g) {
            return timeemb::combined_loss(g, model.forward(g, batch), g.constant(timeemb::to_rows(batch.y)), 0.75,
                                          timeemb::FrequencyLoss::modulus);
        }));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
    timeemb::ModelConfig c;
    auto model = timeemb::TimeEmbModel::create(c, 0);
    const auto batch = random_batch(c, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(model.predict(batch));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Predict)->Arg(256)->Unit(benchmark::kMillisecond);

} // namespace
