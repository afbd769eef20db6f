#include "polyrag/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "polyrag/text.hpp"

namespace polyrag {

using nlohmann::json;

const char* qa_kind_name(QaKind kind) {
    switch (kind) {
        case QaKind::MCQ: return "MCQ";
        case QaKind::MAQ: return "MAQ";
        case QaKind::OPEN: return "OPEN";
    }
    return "OPEN";
}

std::set<std::string> QAItem::choice_labels() const {
    std::set<std::string> labels;
    for (const auto& [label, _] : choices) labels.insert(label);
    return labels;
}

std::vector<QAItem> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("dataset file '" + path + "' not readable");

    std::vector<QAItem> items;
    std::set<std::string> ids;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fail = [&](const std::string& why) -> UsageError {
            return UsageError("dataset line " + std::to_string(line_no) + ": " + why);
        };
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded()) throw fail("not valid JSON");

        QAItem item;
        item.id = rec.value("id", "");
        if (item.id.empty()) throw fail("missing id");
        if (!ids.insert(item.id).second) throw fail("duplicate id '" + item.id + "'");
        item.question = rec.value("question", "");
        if (trim(item.question).empty()) throw fail("missing question");

        std::string kind = rec.value("kind", "");
        if (kind == "MCQ") item.kind = QaKind::MCQ;
        else if (kind == "MAQ") item.kind = QaKind::MAQ;
        else if (kind == "OPEN") item.kind = QaKind::OPEN;
        else throw fail("kind must be MCQ, MAQ or OPEN");

        if (rec.contains("choices")) {
            for (const auto& [label, text] : rec["choices"].items())
                item.choices.emplace_back(label, text.get<std::string>());
            std::sort(item.choices.begin(), item.choices.end());
        }
        if (rec.contains("gold_entities"))
            item.gold_entities = rec["gold_entities"].get<std::vector<std::string>>();

        if (item.kind == QaKind::OPEN) {
            item.gold_reference = rec.value("gold", "");
            if (trim(item.gold_reference).empty())
                throw fail("OPEN item needs a non-empty gold reference");
        } else {
            if (item.choices.empty()) throw fail("choice item needs choices");
            if (!rec.contains("gold") || !rec["gold"].is_array())
                throw fail("choice item needs a gold label array");
            for (const auto& g : rec["gold"]) item.gold_labels.insert(g.get<std::string>());
            auto labels = item.choice_labels();
            for (const auto& g : item.gold_labels)
                if (!labels.count(g)) throw fail("gold label '" + g + "' not among choices");
            if (item.kind == QaKind::MCQ && item.gold_labels.size() != 1)
                throw fail("MCQ gold must be a single label");
            if (item.gold_labels.empty()) throw fail("gold labels empty");
        }
        items.push_back(std::move(item));
    }
    return items;
}

ChoiceScore score_choices(const std::set<std::string>& predicted,
                          const std::set<std::string>& gold,
                          const std::set<std::string>& choice_labels) {
    for (const auto& p : predicted)
        if (!choice_labels.count(p))
            throw UsageError("score_choices: predicted label '" + p + "' outside choice set");
    for (const auto& g : gold)
        if (!choice_labels.count(g))
            throw UsageError("score_choices: gold label '" + g + "' outside choice set");
    if (gold.empty()) throw UsageError("score_choices: gold set empty");

    size_t hit = 0;
    for (const auto& p : predicted) hit += gold.count(p);

    ChoiceScore s;
    s.precision = predicted.empty() ? 0.0 : double(hit) / double(predicted.size());
    s.recall = double(hit) / double(gold.size());
    s.f1 = (s.precision + s.recall) == 0.0
               ? 0.0
               : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

namespace {

std::vector<std::string> ws_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) tokens.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

}  // namespace

double bleu_n(const std::string& candidate, const std::string& reference, int n) {
    if (n < 1) throw UsageError("bleu_n: n must be >= 1");
    auto cand = ws_tokens(candidate);
    auto ref = ws_tokens(reference);
    if (cand.empty()) return 0.0;

    double log_sum = 0.0;
    for (int order = 1; order <= n; ++order) {
        std::map<std::vector<std::string>, int> ref_counts;
        for (size_t i = 0; order <= int(ref.size()) && i + size_t(order) <= ref.size(); ++i)
            ++ref_counts[std::vector<std::string>(ref.begin() + long(i),
                                                  ref.begin() + long(i) + order)];
        int total = 0;
        int matched = 0;
        std::map<std::vector<std::string>, int> used;
        for (size_t i = 0; order <= int(cand.size()) && i + size_t(order) <= cand.size(); ++i) {
            std::vector<std::string> gram(cand.begin() + long(i),
                                          cand.begin() + long(i) + order);
            ++total;
            auto it = ref_counts.find(gram);
            if (it != ref_counts.end() && used[gram] < it->second) {
                ++used[gram];
                ++matched;  // clipped match
            }
        }
        log_sum += std::log(double(matched + 1) / double(total + 1));
    }
    double geo_mean = std::exp(log_sum / double(n));
    double bp = cand.size() >= ref.size()
                    ? 1.0
                    : std::exp(1.0 - double(ref.size()) / double(cand.size()));
    return bp * geo_mean;
}

double embedding_similarity(const std::string& candidate, const std::string& reference,
                            EmbeddingProvider& provider) {
    return cosine(provider.embed(candidate), provider.embed(reference));
}

double hit_rate(const std::string& response, const std::vector<std::string>& gold_entities) {
    if (gold_entities.empty())
        throw UsageError("hit_rate: gold entity set is empty, metric undefined");
    std::string haystack = normalize_ws_lower(response);
    size_t hits = 0;
    for (const auto& e : gold_entities) {
        std::string needle = normalize_ws_lower(e);
        if (!needle.empty() && haystack.find(needle) != std::string::npos) ++hits;
    }
    return double(hits) / double(gold_entities.size());
}

std::set<std::string> extract_choice_labels(
    const std::string& answer,
    const std::vector<std::pair<std::string, std::string>>& choices) {
    std::set<std::string> labels;
    std::set<std::string> known;
    for (const auto& [label, _] : choices) known.insert(label);

    for (auto token : ws_tokens(answer)) {
        // Strip surrounding punctuation: "(B)", "B)", "B.", "B," ...
        size_t b = 0, e = token.size();
        while (b < e && !std::isalnum(static_cast<unsigned char>(token[b]))) ++b;
        while (e > b && !std::isalnum(static_cast<unsigned char>(token[e - 1]))) --e;
        std::string core = token.substr(b, e - b);
        if (core.size() != 1) continue;
        std::string upper(1, char(std::toupper(static_cast<unsigned char>(core[0]))));
        if (known.count(upper)) labels.insert(upper);
    }
    return labels;
}

EvalReport run_benchmark(const std::vector<QAItem>& dataset, PyramidIndexes& indexes,
                         const LlmContext& llm, const QueryConfig& config,
                         const std::map<std::string, std::string>& config_snapshot) {
    std::vector<QAItem> items = dataset;
    std::sort(items.begin(), items.end(),
              [](const QAItem& a, const QAItem& b) { return a.id < b.id; });

    EvalReport report;
    report.config_snapshot = config_snapshot;
    report.notes =
        "hit_rate averaged per item over items with gold entities (corpus-pooled "
        "averaging is the untaken alternative)";

    std::map<std::string, int> layer_counts;
    for (const auto& item : items) {
        EvalItemResult r;
        r.id = item.id;
        r.kind = item.kind;
        try {
            AnsweredQuery aq = answer(item.question, indexes, llm, config);
            r.resolved_layer = layer_name(aq.resolved_layer);
            r.answer = aq.answer;
            ++layer_counts[r.resolved_layer];
            ++report.answered;

            if (item.kind == QaKind::OPEN) {
                r.bleu2 = bleu_n(aq.answer, item.gold_reference, 2);
                r.bleu4 = bleu_n(aq.answer, item.gold_reference, 4);
                r.emb_similarity =
                    embedding_similarity(aq.answer, item.gold_reference, indexes.embedder());
                if (!item.gold_entities.empty())
                    r.hit = hit_rate(aq.answer, item.gold_entities);
            } else {
                auto predicted = extract_choice_labels(aq.answer, item.choices);
                r.choice_score =
                    score_choices(predicted, item.gold_labels, item.choice_labels());
            }
        } catch (const std::exception& e) {
            r.failed = true;
            r.failure = e.what();
            ++report.failed;
        }
        report.items.push_back(std::move(r));
    }

    auto mean_of = [&](auto getter) -> std::optional<double> {
        double sum = 0.0;
        int count = 0;
        for (const auto& r : report.items) {
            if (r.failed) continue;
            if (auto v = getter(r)) {
                sum += *v;
                ++count;
            }
        }
        if (count == 0) return std::nullopt;
        return sum / count;
    };

    if (auto v = mean_of([](const EvalItemResult& r) -> std::optional<double> {
            if (!r.choice_score) return std::nullopt;
            return r.choice_score->precision;
        }))
        report.aggregates["precision"] = *v;
    if (auto v = mean_of([](const EvalItemResult& r) -> std::optional<double> {
            if (!r.choice_score) return std::nullopt;
            return r.choice_score->recall;
        }))
        report.aggregates["recall"] = *v;
    if (auto v = mean_of([](const EvalItemResult& r) -> std::optional<double> {
            if (!r.choice_score) return std::nullopt;
            return r.choice_score->f1;
        }))
        report.aggregates["f1"] = *v;
    if (auto v = mean_of([](const EvalItemResult& r) { return r.bleu2; }))
        report.aggregates["bleu2"] = *v;
    if (auto v = mean_of([](const EvalItemResult& r) { return r.bleu4; }))
        report.aggregates["bleu4"] = *v;
    if (auto v = mean_of([](const EvalItemResult& r) { return r.emb_similarity; }))
        report.aggregates["embedding_similarity"] = *v;
    if (auto v = mean_of([](const EvalItemResult& r) { return r.hit; }))
        report.aggregates["hit_rate_percent"] = *v * 100.0;

    if (report.answered > 0)
        for (const auto& [layer, count] : layer_counts)
            report.routing[layer] = double(count) / double(report.answered);
    return report;
}

std::string EvalReport::to_json_string() const {
    json obj;
    obj["aggregates"] = aggregates;
    obj["routing"] = routing;
    obj["answered"] = answered;
    obj["failed"] = failed;
    obj["config_snapshot"] = config_snapshot;
    obj["notes"] = notes;
    obj["items"] = json::array();
    for (const auto& r : items) {
        json it;
        it["id"] = r.id;
        it["kind"] = qa_kind_name(r.kind);
        if (r.failed) {
            it["failed"] = true;
            it["failure"] = r.failure;
        } else {
            it["resolved_layer"] = r.resolved_layer;
            it["answer"] = r.answer;
            if (r.choice_score) {
                it["precision"] = r.choice_score->precision;
                it["recall"] = r.choice_score->recall;
                it["f1"] = r.choice_score->f1;
            }
            if (r.bleu2) it["bleu2"] = *r.bleu2;
            if (r.bleu4) it["bleu4"] = *r.bleu4;
            if (r.emb_similarity) it["embedding_similarity"] = *r.emb_similarity;
            if (r.hit) it["hit_rate"] = *r.hit;
        }
        obj["items"].push_back(std::move(it));
    }
    return obj.dump(2) + "\n";
}

std::string EvalReport::to_csv_string() const {
    auto field = [](std::string s) {
        bool quote = s.find_first_of(",\"\n") != std::string::npos;
        if (!quote) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += "\"\"";
            else out.push_back(c);
        }
        return out + "\"";
    };
    auto num = [](const std::optional<double>& v) {
        if (!v) return std::string();
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", *v);
        return std::string(buf);
    };

    std::string out =
        "id,kind,failed,resolved_layer,precision,recall,f1,bleu2,bleu4,"
        "embedding_similarity,hit_rate,answer\n";
    for (const auto& r : items) {
        std::optional<double> p, rec, f1;
        if (r.choice_score) {
            p = r.choice_score->precision;
            rec = r.choice_score->recall;
            f1 = r.choice_score->f1;
        }
        out += field(r.id) + "," + qa_kind_name(r.kind) + "," + (r.failed ? "1" : "0") + "," +
               field(r.resolved_layer) + "," + num(p) + "," + num(rec) + "," + num(f1) + "," +
               num(r.bleu2) + "," + num(r.bleu4) + "," + num(r.emb_similarity) + "," +
               num(r.hit) + "," + field(r.answer) + "\n";
    }
    return out;
}

}  // namespace polyrag
