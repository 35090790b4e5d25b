#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "engage/eda.hpp"
#include "engage/features.hpp"
#include "engage/hrv.hpp"
#include "engage/model.hpp"
#include "engage/segment.hpp"

using namespace engage;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0, 1);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

void BM_CvxEda(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0)) * 240;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = std::fmod(static_cast<double>(i) / 4.0, 45.0);
        y[i] = 1.0 + 0.3 * (std::exp(-t / 2.0) - std::exp(-t / 0.7));
    }
    const SensorTrace eda{Channel::EDA, 0.0, 4.0, y};
    for (auto _ : state) benchmark::DoNotOptimize(cvxeda_decompose(eda));
}
BENCHMARK(BM_CvxEda)->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_DtwBanded(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = noise(n, 1);
    const auto b = noise(n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(dtw_distance(a, b));
}
BENCHMARK(BM_DtwBanded)->Arg(600)->Arg(2400);

void BM_DtwExact(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = noise(n, 3);
    const auto b = noise(n, 4);
    for (auto _ : state) benchmark::DoNotOptimize(dtw_distance(a, b, DtwMode::exact));
}
BENCHMARK(BM_DtwExact)->Arg(600);

void BM_Gbm(benchmark::State& state) {
    const auto rows = static_cast<Eigen::Index>(state.range(0));
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(rows, 64);
    std::vector<double> y(static_cast<std::size_t>(rows));
    for (Eigen::Index i = 0; i < rows; ++i) y[static_cast<std::size_t>(i)] = std::sin(3 * X(i, 0)) + X(i, 1) * X(i, 2);
    for (auto _ : state) benchmark::DoNotOptimize(fit_gbm(X, y, GbmParams{15, 0.1, 100, 5, 0}));
}
BENCHMARK(BM_Gbm)->Arg(150)->Arg(600)->Unit(benchmark::kMillisecond);

void BM_Igts(benchmark::State& state) {
    const auto T = static_cast<std::size_t>(state.range(0));
    auto x = noise(T, 5);
    for (std::size_t i = T / 3; i < T; ++i) x[i] += 3.0;
    const auto X = with_complement(x);
    for (auto _ : state) benchmark::DoNotOptimize(igts_topdown(X, 3));
}
BENCHMARK(BM_Igts)->Arg(600)->Arg(2400);

void BM_HrvFeatures(benchmark::State& state) {
    std::vector<double> beats = {0.0};
    std::mt19937_64 rng(6);
    std::normal_distribution<double> d(0.85, 0.04);
    while (beats.back() < 2400.0) beats.push_back(beats.back() + d(rng));
    const auto ibi = ibi_from_beats(beats);
    for (auto _ : state) benchmark::DoNotOptimize(hrv_features(ibi));
}
BENCHMARK(BM_HrvFeatures);

}  // namespace

BENCHMARK_MAIN();
