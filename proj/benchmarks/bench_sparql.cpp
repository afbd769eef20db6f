#include <benchmark/benchmark.h>

#include "polyrag/rng.hpp"
#include "polyrag/sparql.hpp"

using namespace polyrag;

static void BM_SparqlExecute(benchmark::State& state) {
    Rng rng(6);
    std::vector<OntologyInstance> store;
    for (int i = 0; i < state.range(0); ++i)
        store.push_back({"s" + std::to_string(rng.index(50)), "C",
                         "p" + std::to_string(rng.index(6)),
                         "x" + std::to_string(rng.index(40)), ValueKind::Text, ""});
    auto query = parse_sparql(
        R"(SELECT ?s ?v WHERE { ?s <p0> ?m . ?m <p1> ?v . FILTER(CONTAINS(LCASE(?v), "x1")) })");
    for (auto _ : state) {
        BindingTable t = execute(query, store);
        benchmark::DoNotOptimize(t);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SparqlExecute)->Arg(100)->Arg(1000)->Arg(5000);

static void BM_SparqlParse(benchmark::State& state) {
    std::string text =
        R"(SELECT ?s ?v WHERE { ?s <works_in> "CS" . ?s <interested_in> ?v . )"
        R"(FILTER(CONTAINS(LCASE(?v), "cloud")) } LIMIT 20)";
    for (auto _ : state) {
        auto q = parse_sparql(text);
        benchmark::DoNotOptimize(q);
    }
}
BENCHMARK(BM_SparqlParse);
