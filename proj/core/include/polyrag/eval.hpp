#pragma once
// Benchmark runner and metrics: choice-set precision/recall/F1, smoothed
// BLEU, embedding similarity, entity hit rate, and per-layer routing
// statistics.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "polyrag/query.hpp"

namespace polyrag {

enum class QaKind { MCQ, MAQ, OPEN };
const char* qa_kind_name(QaKind kind);

struct QAItem {
    std::string id;
    std::string question;
    QaKind kind = QaKind::OPEN;
    std::vector<std::pair<std::string, std::string>> choices;  // label -> option text
    std::set<std::string> gold_labels;                         // MCQ (singleton) / MAQ
    std::string gold_reference;                                // OPEN
    std::vector<std::string> gold_entities;                    // optional, for hit rate

    std::set<std::string> choice_labels() const;
};

// One QAItem per JSONL line; kind-specific required fields are validated.
std::vector<QAItem> load_dataset(const std::string& path);

struct ChoiceScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// P = |pred∩gold|/|pred| (0 when pred empty), R = |pred∩gold|/|gold|,
// F1 = harmonic mean (0 when both are 0). Labels outside the choice set
// are an error.
ChoiceScore score_choices(const std::set<std::string>& predicted,
                          const std::set<std::string>& gold,
                          const std::set<std::string>& choice_labels);

// Single-pair BLEU-n: geometric mean of +1-smoothed modified i-gram
// precisions for i <= n, times the brevity penalty. Empty candidate -> 0.
double bleu_n(const std::string& candidate, const std::string& reference, int n);

double embedding_similarity(const std::string& candidate, const std::string& reference,
                            EmbeddingProvider& provider);

// Fraction of gold entities occurring in the response after casefolding and
// whitespace collapsing. Empty gold set is an error (callers skip the item).
double hit_rate(const std::string& response, const std::vector<std::string>& gold_entities);

// Standalone letters and option prefixes ("B", "B)", "(B)", "B.") found in
// the answer, restricted to the item's labels. Unparseable output -> empty.
std::set<std::string> extract_choice_labels(
    const std::string& answer, const std::vector<std::pair<std::string, std::string>>& choices);

struct EvalItemResult {
    std::string id;
    QaKind kind = QaKind::OPEN;
    bool failed = false;
    std::string failure;
    std::string resolved_layer;
    std::string answer;
    std::optional<ChoiceScore> choice_score;
    std::optional<double> bleu2, bleu4, emb_similarity, hit;
};

struct EvalReport {
    std::vector<EvalItemResult> items;  // sorted by item id
    std::map<std::string, double> aggregates;
    std::map<std::string, double> routing;  // layer -> proportion of answered
    int answered = 0;
    int failed = 0;
    std::map<std::string, std::string> config_snapshot;
    std::string notes;

    std::string to_json_string() const;
    std::string to_csv_string() const;  // flat per-item table
};

// Runs answer() per item, scores by kind, aggregates, computes routing
// proportions. Per-item pipeline failures are recorded and excluded from
// aggregates.
EvalReport run_benchmark(const std::vector<QAItem>& dataset, PyramidIndexes& indexes,
                         const LlmContext& llm, const QueryConfig& config,
                         const std::map<std::string, std::string>& config_snapshot);

}  // namespace polyrag
