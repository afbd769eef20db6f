#include <benchmark/benchmark.h>

#include "polyrag/gaussian.hpp"
#include "polyrag/rng.hpp"

using namespace polyrag;

namespace {

std::vector<Vector> points(Rng& rng, size_t n, int dim) {
    std::vector<Vector> out;
    for (size_t i = 0; i < n; ++i) {
        Vector v(dim);
        for (int d = 0; d < dim; ++d) v[d] = rng.normal();
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace

static void BM_FitGaussian(benchmark::State& state) {
    Rng rng(3);
    auto pts = points(rng, size_t(state.range(0)), 64);
    for (auto _ : state) {
        GaussianModel m = fit_gaussian(pts, 1e-4, 8);
        benchmark::DoNotOptimize(m);
    }
}
BENCHMARK(BM_FitGaussian)->Arg(32)->Arg(256)->Arg(2048);

static void BM_PriorityScore(benchmark::State& state) {
    Rng rng(4);
    auto o = fit_gaussian(points(rng, 64, 64), 1e-4, 8);
    auto k = fit_gaussian(points(rng, 64, 64), 1e-4, 8);
    auto xs = points(rng, 256, 64);
    size_t i = 0;
    for (auto _ : state) {
        double pr = priority_score(o, k, xs[i++ % xs.size()]);
        benchmark::DoNotOptimize(pr);
    }
}
BENCHMARK(BM_PriorityScore);
