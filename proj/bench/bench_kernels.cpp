// Serial reference vs OpenMP kernel for each parallel hot path.
// Arg(0) runs the serial reference; Arg(1) the parallel kernel.
#include <benchmark/benchmark.h>

#include "vlaudit/ber.hpp"
#include "vlaudit/evaluation.hpp"
#include "vlaudit/parallel.hpp"
#include "vlaudit/scores.hpp"
#include "vlaudit/shift.hpp"
#include "vlaudit/synth.hpp"

using namespace vlaudit;

namespace {

const std::vector<GenerationTrace>& traces() {
    static const auto t = [] {
        synth::SynthConfig cfg;
        cfg.n = 500;
        cfg.signal = 0.5;
        return synth::gen_traces(cfg);
    }();
    return t;
}

const synth::ImageSets& images() {
    static const auto s = [] {
        synth::SynthConfig cfg;
        cfg.n = 64;
        cfg.height = 64;
        cfg.width = 64;
        return synth::gen_images(cfg);
    }();
    return s;
}

const std::pair<EmbeddingSpace, EmbeddingSpace>& embeddings() {
    static const auto e = [] {
        synth::SynthConfig cfg;
        cfg.n = 600;
        cfg.dim = 32;
        cfg.delta = 1.0;
        return synth::gen_shifted_embeddings(cfg);
    }();
    return e;
}

std::pair<ber::Rows, std::vector<int>> ber_fixture() {
    auto rng = task_rng(0, 1, 0);
    std::normal_distribution<double> g;
    ber::Rows x;
    std::vector<int> y;
    for (std::size_t i = 0; i < 2000; ++i) {
        const int l = static_cast<int>(i % 2);
        x.push_back({g(rng) + (l ? 1.0 : -1.0), g(rng)});
        y.push_back(l);
    }
    return {x, y};
}

void BM_ScoreDataset(benchmark::State& state) {
    mi::MethodSpec spec;
    spec.kind = mi::MethodKind::MaxRenyiK;
    spec.k_percent = 20.0;
    const auto& t = traces();
    for (auto _ : state)
        benchmark::DoNotOptimize(state.range(0) ? mi::score_dataset(t, spec) : mi::serial::score_dataset(t, spec));
}
BENCHMARK(BM_ScoreDataset)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Dft(benchmark::State& state) {
    GrayImage img(96, 96);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<double>((i * 37) % 256);
    for (auto _ : state)
        benchmark::DoNotOptimize(state.range(0) ? shift::dft_magnitude(img) : shift::serial::dft_magnitude(img));
}
BENCHMARK(BM_Dft)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_FrequencySpace(benchmark::State& state) {
    const auto& imgs = images().sharp;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < imgs.size(); ++i) ids.push_back(synth::sample_id(i));
    for (auto _ : state)
        benchmark::DoNotOptimize(state.range(0) ? shift::frequency_space(ids, imgs, 10)
                                                : shift::serial::frequency_space(ids, imgs, 10));
}
BENCHMARK(BM_FrequencySpace)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SlicedWasserstein(benchmark::State& state) {
    const auto& [a, b] = embeddings();
    for (auto _ : state)
        benchmark::DoNotOptimize(state.range(0) ? shift::sliced_wasserstein(a.rows(), b.rows(), 128, 2.0, 0)
                                                : shift::serial::sliced_wasserstein(a.rows(), b.rows(), 128, 2.0, 0));
}
BENCHMARK(BM_SlicedWasserstein)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_WiredSpace(benchmark::State& state) {
    const auto& [a, b] = embeddings();
    shift::WiredParams p;
    p.repeats = 4;
    for (auto _ : state)
        benchmark::DoNotOptimize(state.range(0) ? shift::wired_space(a.rows(), b.rows(), p)
                                                : shift::serial::wired_space(a.rows(), b.rows(), p));
}
BENCHMARK(BM_WiredSpace)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BuildGraph(benchmark::State& state) {
    const auto [x, y] = ber_fixture();
    for (auto _ : state)
        benchmark::DoNotOptimize(state.range(0) ? ber::build_graph(x, 10) : ber::serial::build_graph(x, 10));
}
BENCHMARK(BM_BuildGraph)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_LabelSpread(benchmark::State& state) {
    const auto [x, y] = ber_fixture();
    const auto g = ber::build_graph(x, 10);
    std::vector<int> seeds(y);
    for (std::size_t i = 0; i < seeds.size(); i += 3) seeds[i] = -1;
    for (auto _ : state)
        benchmark::DoNotOptimize(state.range(0) ? ber::label_spread(g, seeds, 0.9, 1000, 1e-6)
                                                : ber::serial::label_spread(g, seeds, 0.9, 1000, 1e-6));
}
BENCHMARK(BM_LabelSpread)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BootstrapSetAuc(benchmark::State& state) {
    auto rng = task_rng(0, 2, 0);
    std::normal_distribution<double> g;
    std::vector<double> m(3000), n(3000);
    for (auto& v : m) v = g(rng) + 0.2;
    for (auto& v : n) v = g(rng);
    for (auto _ : state)
        benchmark::DoNotOptimize(state.range(0) ? eval::bootstrap_set_auc(m, n, 50, 1000, 0)
                                                : eval::serial::bootstrap_set_auc(m, n, 50, 1000, 0));
}
BENCHMARK(BM_BootstrapSetAuc)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
