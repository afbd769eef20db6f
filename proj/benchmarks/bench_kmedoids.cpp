#include <benchmark/benchmark.h>

#include "polyrag/kmedoids.hpp"
#include "polyrag/rng.hpp"

using namespace polyrag;

static void BM_KMedoids(benchmark::State& state) {
    Rng rng(5);
    std::vector<Vector> pts;
    for (int i = 0; i < state.range(0); ++i) {
        Vector v(16);
        do {
            for (int d = 0; d < 16; ++d) v[d] = rng.uniform(-1, 1);
        } while (v.norm() < 1e-9);
        pts.push_back(v);
    }
    for (auto _ : state) {
        Clustering c = k_medoids(pts, size_t(state.range(1)), 42);
        benchmark::DoNotOptimize(c);
    }
}
BENCHMARK(BM_KMedoids)->Args({50, 3})->Args({100, 5})->Args({200, 8});
