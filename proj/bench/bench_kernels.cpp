// Serial reference kernels against their OpenMP counterparts. Every parallel
// benchmark first checks that it reproduces the serial result bit for bit.

#include <random>

#include <benchmark/benchmark.h>

#include "doust/baselines.hpp"
#include "doust/ensemble.hpp"
#include "doust/kernels.hpp"

using namespace doust;

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
    return m;
}

kernels::Execution mode(const benchmark::State& state) {
    return state.range(1) == 0 ? kernels::Execution::serial : kernels::Execution::parallel;
}

void label(benchmark::State& state) {
    state.SetLabel(state.range(1) == 0 ? "serial" : "omp x" + std::to_string(kernels::worker_count()));
}

void BM_KthNearest(benchmark::State& state) {
    const Matrix ref = gaussian(state.range(0), 16, 1);
    const Matrix q = gaussian(state.range(0) / 2, 16, 2);
    const auto ex = mode(state);
    if (kernels::kth_nearest_distance(ref, q, 5, ex) != kernels::serial::kth_nearest_distance(ref, q, 5)) {
        state.SkipWithError("parallel result differs from serial");
        return;
    }
    for (auto _ : state) benchmark::DoNotOptimize(kernels::kth_nearest_distance(ref, q, 5, ex));
    state.SetItemsProcessed(state.iterations() * q.rows());
    label(state);
}
BENCHMARK(BM_KthNearest)->ArgsProduct({{1000, 4000}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_MemberMean(benchmark::State& state) {
    const Matrix s = gaussian(state.range(0), 100, 3);
    const auto ex = mode(state);
    if (kernels::member_mean(s, ex) != kernels::serial::member_mean(s)) {
        state.SkipWithError("parallel result differs from serial");
        return;
    }
    for (auto _ : state) benchmark::DoNotOptimize(kernels::member_mean(s, ex));
    state.SetItemsProcessed(state.iterations() * s.rows());
    label(state);
}
BENCHMARK(BM_MemberMean)->ArgsProduct({{10000, 100000}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_EnsembleScore(benchmark::State& state) {
    static const EnsembleModel model = [] {
        DoustConfig cfg;
        cfg.ensemble_size = 16;
        cfg.pretrain_epochs = 1;
        cfg.refine_epochs = 1;
        return train_ensemble(gaussian(500, 10, 4), gaussian(500, 10, 5), cfg);
    }();
    const Matrix x = gaussian(state.range(0), 10, 6);
    const auto ex = mode(state);
    if (model.score(x, ex) != model.score(x, kernels::Execution::serial)) {
        state.SkipWithError("parallel result differs from serial");
        return;
    }
    for (auto _ : state) benchmark::DoNotOptimize(model.score(x, ex));
    state.SetItemsProcessed(state.iterations() * x.rows());
    label(state);
}
BENCHMARK(BM_EnsembleScore)->ArgsProduct({{2000, 20000}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_EnsembleTrain(benchmark::State& state) {
    const Matrix train = gaussian(400, 8, 7);
    const Matrix test = gaussian(400, 8, 8);
    DoustConfig cfg;
    cfg.hidden = {64, 64};
    cfg.ensemble_size = static_cast<std::size_t>(state.range(0));
    cfg.pretrain_epochs = 1;
    cfg.refine_epochs = 5;
    const auto ex = mode(state);
    for (auto _ : state) benchmark::DoNotOptimize(train_ensemble(train, test, cfg, {}, ex));
    label(state);
}
BENCHMARK(BM_EnsembleTrain)->ArgsProduct({{8}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_IsolationForestFit(benchmark::State& state) {
    const Matrix x = gaussian(state.range(0), 8, 9);
    const auto ex = mode(state);
    for (auto _ : state) benchmark::DoNotOptimize(baselines::IsolationForestModel::fit(x, {}, ex));
    label(state);
}
BENCHMARK(BM_IsolationForestFit)->ArgsProduct({{5000}, {0, 1}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
