#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "polyrag/eval.hpp"
#include "polyrag/rng.hpp"

using namespace polyrag;

TEST_SUITE_BEGIN("eval");

namespace {

std::set<std::string> labels4 = {"A", "B", "C", "D"};

}  // namespace

TEST_CASE("score_choices basics and conventions") {
    auto s = score_choices({"B"}, {"B"}, labels4);
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 1.0);
    CHECK(s.f1 == 1.0);

    s = score_choices({}, {"A"}, labels4);
    CHECK(s.precision == 0.0);
    CHECK(s.recall == 0.0);
    CHECK(s.f1 == 0.0);

    CHECK_THROWS_AS(score_choices({"Z"}, {"A"}, labels4), UsageError);
    CHECK_THROWS_AS(score_choices({"A"}, {}, labels4), UsageError);
}

TEST_CASE("select-all over eight choices shows the inflated-recall pathology") {
    std::set<std::string> labels8 = {"A", "B", "C", "D", "E", "F", "G", "H"};
    auto s = score_choices(labels8, {"A", "B"}, labels8);
    CHECK(s.precision == doctest::Approx(0.25));
    CHECK(s.recall == doctest::Approx(1.0));
    CHECK(s.f1 == doctest::Approx(0.4));
}

TEST_CASE("score_choices equals brute-force set arithmetic on all subset pairs") {
    std::vector<std::string> labels = {"A", "B", "C", "D"};
    for (int pred_mask = 0; pred_mask < 16; ++pred_mask) {
        for (int gold_mask = 1; gold_mask < 16; ++gold_mask) {
            std::set<std::string> pred, gold;
            for (int i = 0; i < 4; ++i) {
                if (pred_mask & (1 << i)) pred.insert(labels[size_t(i)]);
                if (gold_mask & (1 << i)) gold.insert(labels[size_t(i)]);
            }
            auto s = score_choices(pred, gold, labels4);
            int inter = __builtin_popcount(pred_mask & gold_mask);
            double expect_p = pred.empty() ? 0.0 : double(inter) / double(pred.size());
            double expect_r = double(inter) / double(gold.size());
            double expect_f = (expect_p + expect_r) == 0
                                  ? 0.0
                                  : 2 * expect_p * expect_r / (expect_p + expect_r);
            CHECK(s.precision == doctest::Approx(expect_p).epsilon(1e-15));
            CHECK(s.recall == doctest::Approx(expect_r).epsilon(1e-15));
            CHECK(s.f1 == doctest::Approx(expect_f).epsilon(1e-15));
        }
    }
}

TEST_CASE("bleu: identity, emptiness, bounds") {
    CHECK(bleu_n("the cat sat on the mat", "the cat sat on the mat", 2) ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK(bleu_n("the cat sat on the mat", "the cat sat on the mat", 4) ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK(bleu_n("", "reference text", 2) == 0.0);

    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::string cand, ref;
        for (size_t i = 0; i < 1 + rng.index(12); ++i)
            cand += "w" + std::to_string(rng.index(6)) + " ";
        for (size_t i = 0; i < 1 + rng.index(12); ++i)
            ref += "w" + std::to_string(rng.index(6)) + " ";
        double b = bleu_n(cand, ref, 4);
        CHECK(b >= 0.0);
        CHECK(b <= 1.0);
    }
}

TEST_CASE("bleu hand-computed oracle: prefix candidate") {
    // cand |the cat sat|, ref |the cat sat down|: all 1- and 2-grams match,
    // so smoothed precisions are 1 and only the brevity penalty remains:
    // exp(1 - 4/3).
    double expected = std::exp(1.0 - 4.0 / 3.0);
    CHECK(bleu_n("the cat sat", "the cat sat down", 2) ==
          doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("bleu hand-computed oracle: clipping") {
    // cand |a b b|, ref |b b|: p1 = (2+1)/(3+1), p2 = (1+1)/(2+1), BP = 1.
    double expected = std::sqrt((3.0 / 4.0) * (2.0 / 3.0));
    CHECK(bleu_n("a b b", "b b", 2) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("bleu smoothed floor on long zero-overlap candidates") {
    std::string cand, ref;
    for (int i = 0; i < 24; ++i) cand += "x" + std::to_string(i) + " ";
    for (int i = 0; i < 20; ++i) ref += "y" + std::to_string(i) + " ";
    CHECK(bleu_n(cand, ref, 2) < 0.05);
}

TEST_CASE("embedding similarity: identity, symmetry, frozen golden") {
    LocalHashEmbedder e(64, 42);
    CHECK(embedding_similarity("same words", "same words", e) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(embedding_similarity("alpha beta", "gamma delta", e) ==
          doctest::Approx(embedding_similarity("gamma delta", "alpha beta", e))
              .epsilon(1e-15));
    // Frozen from one blessed run of the seed-42 provider.
    CHECK(embedding_similarity("the cat sat on the mat", "a cat was sitting on a mat", e) ==
          doctest::Approx(0.39731148432780738).epsilon(1e-12));
}

TEST_CASE("hit_rate counts normalized substring hits") {
    CHECK(hit_rate("Alice works with Bob and Carol", {"alice", "bob", "carol"}) ==
          doctest::Approx(1.0));
    CHECK(hit_rate("only alice appears", {"Alice", "Bob", "Carol", "Dana"}) ==
          doctest::Approx(0.25));
    CHECK(hit_rate("ETH  Zurich  alum", {"eth zurich"}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(hit_rate("anything", {}), UsageError);
}

TEST_CASE("hit_rate is monotone under appends") {
    Rng rng(9);
    std::vector<std::string> entities = {"alpha", "beta gamma", "delta"};
    std::string response = "starts with alpha only";
    double previous = hit_rate(response, entities);
    for (int step = 0; step < 200; ++step) {
        response += rng.index(2) ? " filler" : (" " + entities[rng.index(entities.size())]);
        double now = hit_rate(response, entities);
        CHECK(now >= previous);
        previous = now;
    }
}

TEST_CASE("choice labels are extracted from standalone letters and prefixes") {
    std::vector<std::pair<std::string, std::string>> choices = {
        {"A", "Alice"}, {"B", "Bob"}, {"C", "Carol"}, {"D", "Dana"}};
    CHECK(extract_choice_labels("A) Alice", choices) == std::set<std::string>{"A"});
    CHECK(extract_choice_labels("A, B, and C", choices) ==
          std::set<std::string>{"A", "B", "C"});
    CHECK(extract_choice_labels("(b) maybe", choices) == std::set<std::string>{"B"});
    CHECK(extract_choice_labels("no labels here", choices).empty());
    CHECK(extract_choice_labels("Z) unknown", choices).empty());
}

TEST_CASE("dataset loader validates kind-specific fields") {
    testutil::TempDir tmp("dataset");
    SUBCASE("valid dataset loads") {
        testutil::write_file(
            tmp.file("qa.jsonl"),
            R"({"id": "a", "kind": "MCQ", "question": "q?", "choices": {"A": "x", "B": "y"}, "gold": ["A"]})"
            "\n"
            R"({"id": "b", "kind": "OPEN", "question": "q?", "gold": "ref", "gold_entities": ["e"]})"
            "\n");
        auto items = load_dataset(tmp.file("qa.jsonl"));
        REQUIRE(items.size() == 2);
        CHECK(items[0].kind == QaKind::MCQ);
        CHECK(items[1].gold_reference == "ref");
    }
    SUBCASE("MCQ with two golds is rejected") {
        testutil::write_file(
            tmp.file("bad.jsonl"),
            R"({"id": "a", "kind": "MCQ", "question": "q?", "choices": {"A": "x", "B": "y"}, "gold": ["A", "B"]})"
            "\n");
        CHECK_THROWS_AS(load_dataset(tmp.file("bad.jsonl")), UsageError);
    }
    SUBCASE("gold label outside choices is rejected") {
        testutil::write_file(
            tmp.file("bad.jsonl"),
            R"({"id": "a", "kind": "MAQ", "question": "q?", "choices": {"A": "x"}, "gold": ["B"]})"
            "\n");
        CHECK_THROWS_AS(load_dataset(tmp.file("bad.jsonl")), UsageError);
    }
    SUBCASE("OPEN without a reference is rejected") {
        testutil::write_file(tmp.file("bad.jsonl"),
                             R"({"id": "a", "kind": "OPEN", "question": "q?"})"
                             "\n");
        CHECK_THROWS_AS(load_dataset(tmp.file("bad.jsonl")), UsageError);
    }
}

TEST_CASE("toy benchmark: golden routing, clean aggregates, reproducible report") {
    testutil::ToyFixture toy;
    KnowledgePyramid p = testutil::build_full_toy(toy);
    PyramidIndexes indexes(p, *toy.embedder);
    auto dataset = load_dataset(toy.qa());
    REQUIRE(dataset.size() == 12);

    EvalReport report =
        run_benchmark(dataset, indexes, toy.llm, toy.config.query, toy.config.snapshot());
    CHECK(report.answered == 12);
    CHECK(report.failed == 0);
    CHECK(report.routing.at("Ontology") == doctest::Approx(4.0 / 12.0));
    CHECK(report.routing.at("KG") == doctest::Approx(5.0 / 12.0));
    CHECK(report.routing.at("RawText") == doctest::Approx(3.0 / 12.0));

    double total = 0;
    for (const auto& [_, share] : report.routing) total += share;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    CHECK(report.aggregates.at("precision") == doctest::Approx(1.0));
    CHECK(report.aggregates.at("recall") == doctest::Approx(1.0));
    CHECK(report.aggregates.at("hit_rate_percent") == doctest::Approx(100.0));
    CHECK(report.aggregates.at("bleu2") > 0.9);
    CHECK(report.config_snapshot.at("query.kg_top_k") == "10");
    CHECK(report.config_snapshot.at("query.text_top_k") == "5");

    EvalReport again =
        run_benchmark(dataset, indexes, toy.llm, toy.config.query, toy.config.snapshot());
    CHECK(report.to_json_string() == again.to_json_string());

    std::string csv = report.to_csv_string();
    CHECK(csv.find("q01,MCQ,0,Ontology") != std::string::npos);
    CHECK(csv.find("q10,OPEN,0,RawText") != std::string::npos);
}

TEST_CASE("a dataset with only OPEN items reports no choice metrics") {
    testutil::ToyFixture toy;
    KnowledgePyramid p = testutil::build_full_toy(toy);
    PyramidIndexes indexes(p, *toy.embedder);

    std::vector<QAItem> dataset;
    for (auto& item : load_dataset(toy.qa()))
        if (item.kind == QaKind::OPEN) dataset.push_back(std::move(item));
    REQUIRE(dataset.size() == 5);

    EvalReport report =
        run_benchmark(dataset, indexes, toy.llm, toy.config.query, toy.config.snapshot());
    CHECK(report.aggregates.count("precision") == 0);
    CHECK(report.aggregates.count("f1") == 0);
    CHECK(report.aggregates.count("bleu2") == 1);
}

TEST_CASE("per-item failures are excluded from aggregates but accounted for") {
    testutil::ToyFixture toy;
    KnowledgePyramid p = testutil::build_full_toy(toy);

    // A backend that dies on one specific question.
    auto backend = std::make_shared<ScriptedBackend>(
        std::vector<ScriptRule>{{"", "poison pill", "", "", "transport", false},
                                {"query_onto", "", "", "NONE", "", false},
                                {"query_kg", "", "", "No", "", false}},
        ScriptRule{"", "", "", "fallback answer", "", false});
    auto llm = testutil::make_llm(*backend);
    llm.retry = {0, 0};
    PyramidIndexes indexes(p, *toy.embedder);

    std::vector<QAItem> dataset;
    QAItem ok;
    ok.id = "ok";
    ok.kind = QaKind::OPEN;
    ok.question = "anything fine";
    ok.gold_reference = "fallback answer";
    QAItem bad = ok;
    bad.id = "bad";
    bad.question = "poison pill";
    dataset.push_back(ok);
    dataset.push_back(bad);

    EvalReport report = run_benchmark(dataset, indexes, llm, toy.config.query, {});
    CHECK(report.answered == 1);
    CHECK(report.failed == 1);
    CHECK(report.items.size() == 2);
    CHECK(report.items[0].failed);  // sorted by id: "bad" first
    CHECK(report.routing.at("RawText") == doctest::Approx(1.0));
}

TEST_SUITE_END();
