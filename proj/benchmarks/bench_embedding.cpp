#include <benchmark/benchmark.h>

#include "polyrag/embedding.hpp"
#include "polyrag/rng.hpp"

using namespace polyrag;

static void BM_LocalEmbed(benchmark::State& state) {
    LocalHashEmbedder embedder(int(state.range(0)), 42);
    std::string text =
        "Alice works in the Computer Science Department and has published research "
        "in the Journal of Cloud Computing";
    for (auto _ : state) {
        Vector v = embedder.embed(text);
        benchmark::DoNotOptimize(v);
    }
}
BENCHMARK(BM_LocalEmbed)->Arg(64)->Arg(256)->Arg(768);

static void BM_TopK(benchmark::State& state) {
    const int dim = 64;
    Rng rng(7);
    VectorIndex index;
    for (int i = 0; i < state.range(0); ++i) {
        Vector v(dim);
        for (int d = 0; d < dim; ++d) v[d] = rng.uniform(-1, 1);
        index.insert("item" + std::to_string(i), v);
    }
    Vector query(dim);
    for (int d = 0; d < dim; ++d) query[d] = rng.uniform(-1, 1);

    for (auto _ : state) {
        auto top = index.top_k(query, 10);
        benchmark::DoNotOptimize(top);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TopK)->Arg(1000)->Arg(10000)->Arg(30000);
