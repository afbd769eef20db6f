#include <benchmark/benchmark.h>

#include "polyrag/eval.hpp"
#include "polyrag/rng.hpp"

using namespace polyrag;

static void BM_Bleu4(benchmark::State& state) {
    Rng rng(8);
    std::string cand, ref;
    for (int i = 0; i < state.range(0); ++i) {
        cand += "w" + std::to_string(rng.index(40)) + " ";
        ref += "w" + std::to_string(rng.index(40)) + " ";
    }
    for (auto _ : state) {
        double b = bleu_n(cand, ref, 4);
        benchmark::DoNotOptimize(b);
    }
}
BENCHMARK(BM_Bleu4)->Arg(20)->Arg(100)->Arg(400);

static void BM_HitRate(benchmark::State& state) {
    std::vector<std::string> entities;
    for (int i = 0; i < 16; ++i) entities.push_back("entity number " + std::to_string(i));
    std::string response;
    for (int i = 0; i < 200; ++i) response += "word" + std::to_string(i % 23) + " ";
    response += " entity number 3 and entity number 7";
    for (auto _ : state) {
        double h = hit_rate(response, entities);
        benchmark::DoNotOptimize(h);
    }
}
BENCHMARK(BM_HitRate);

BENCHMARK_MAIN();
