#include "polyrag/query.hpp"

#include <chrono>

#include "polyrag/text.hpp"

namespace polyrag {

namespace {

// Pushes its stage entry up front so in-flight calls can attribute token
// counts to it; the duration lands on destruction (also on unwind).
class StageTimer {
public:
    StageTimer(Telemetry& telemetry, std::string name)
        : telemetry_(telemetry), index_(telemetry.stages.size()),
          start_(std::chrono::steady_clock::now()) {
        telemetry_.stages.push_back({std::move(name), 0.0, 0, 0});
    }
    ~StageTimer() {
        auto end = std::chrono::steady_clock::now();
        telemetry_.stages[index_].millis =
            std::chrono::duration<double, std::milli>(end - start_).count();
    }
    Telemetry::Stage& stage() { return telemetry_.stages[index_]; }

private:
    Telemetry& telemetry_;
    size_t index_;
    std::chrono::steady_clock::time_point start_;
};

std::string natural_line(const KgTriplet& t) {
    return t.head + " " + t.relation + " " + t.tail;
}

}  // namespace

const char* layer_name(Layer layer) {
    switch (layer) {
        case Layer::Ontology: return "Ontology";
        case Layer::Kg: return "KG";
        case Layer::RawText: return "RawText";
    }
    return "RawText";
}

bool Telemetry::has_stage(const std::string& name) const {
    for (const auto& s : stages)
        if (s.name == name) return true;
    return false;
}

const VectorIndex& PyramidIndexes::kg_index() {
    std::lock_guard lock(mutex_);
    if (!kg_) {
        VectorIndex index;
        for (const auto& t : pyramid_.kg())
            index.insert(t.id, embedder_.embed(natural_line(t)));
        kg_ = std::move(index);
    }
    return *kg_;
}

const VectorIndex& PyramidIndexes::chunk_index() {
    std::lock_guard lock(mutex_);
    if (!chunks_) {
        VectorIndex index;
        for (const auto& c : pyramid_.chunks()) index.insert(c.id, embedder_.embed(c.text));
        chunks_ = std::move(index);
    }
    return *chunks_;
}

bool kg_agreement(const std::string& question, const std::vector<KgTriplet>& triplets,
                  const LlmContext& llm, Telemetry* telemetry) {
    if (triplets.empty()) throw UsageError("kg_agreement: no triplets provided");

    std::vector<std::string> lines;
    lines.reserve(triplets.size());
    for (const auto& t : triplets) lines.push_back(natural_line(t));

    CompletionParams params = llm.params;
    params.tag = "query_kg";
    std::string prompt = render(llm.templates->get("query_kg"),
                                {{"Q", question}, {"triplets", join(lines, ", ")}});
    Completion completion = complete(*llm.backend, prompt, params, llm.retry);
    if (telemetry && !telemetry->stages.empty()) {
        telemetry->stages.back().prompt_tokens += completion.prompt_tokens;
        telemetry->stages.back().completion_tokens += completion.completion_tokens;
    }

    auto verdict = parse_yes_no(completion.text);
    if (!verdict) {
        if (telemetry)
            telemetry->notes.push_back("agreement verdict unparseable, treated as no");
        return false;
    }
    return *verdict;
}

std::vector<KgTriplet> retrieve_kg(const std::string& question, PyramidIndexes& indexes,
                                   int k) {
    if (k < 1) throw UsageError("retrieve_kg: k must be >= 1");
    std::vector<KgTriplet> out;
    if (indexes.pyramid().kg().empty()) return out;
    Vector q = indexes.embedder().embed(question);
    for (const auto& [id, _] : indexes.kg_index().top_k(q, size_t(k)))
        out.push_back(*indexes.pyramid().triplet_by_id(id));
    return out;
}

std::vector<TextChunk> retrieve_text(const std::string& question, PyramidIndexes& indexes,
                                     int k) {
    if (k < 1) throw UsageError("retrieve_text: k must be >= 1");
    std::vector<TextChunk> out;
    if (indexes.pyramid().chunks().empty()) return out;
    Vector q = indexes.embedder().embed(question);
    for (const auto& [id, _] : indexes.chunk_index().top_k(q, size_t(k)))
        out.push_back(*indexes.pyramid().chunk_by_id(id));
    return out;
}

std::string synthesize_answer(const std::string& question, Layer layer,
                              const std::vector<std::string>& evidence_lines,
                              const LlmContext& llm, const QueryConfig& config,
                              Telemetry* telemetry) {
    if (evidence_lines.empty()) return config.abstention;

    const char* template_name = layer == Layer::Ontology ? "synthesize_onto"
                                : layer == Layer::Kg     ? "synthesize_kg"
                                                         : "synthesize_text";
    const char* slot = layer == Layer::Ontology ? "evidence"
                       : layer == Layer::Kg     ? "triplets"
                                                : "passages";
    CompletionParams params = llm.params;
    params.tag = template_name;
    std::string prompt = render(llm.templates->get(template_name),
                                {{"Q", question}, {slot, join(evidence_lines, "\n")}});
    Completion completion = complete(*llm.backend, prompt, params, llm.retry);
    if (telemetry && !telemetry->stages.empty()) {
        telemetry->stages.back().prompt_tokens += completion.prompt_tokens;
        telemetry->stages.back().completion_tokens += completion.completion_tokens;
    }
    return trim(completion.text);
}

namespace {

AnsweredQuery answer_impl(const std::string& question, PyramidIndexes& indexes,
                          const LlmContext& llm, const QueryConfig& config,
                          std::string& current_stage) {
    AnsweredQuery result;
    result.question = question;
    const KnowledgePyramid& pyramid = indexes.pyramid();
    current_stage = "sparql_generate";

    // Stage 1: ontology. Generation or parse failures degrade to an empty
    // result so the waterfall continues instead of failing the request.
    std::string query_text;
    bool generated = false;
    {
        StageTimer timer(result.telemetry, "sparql_generate");
        try {
            query_text = generate_sparql(question, pyramid.schema, *llm.backend,
                                         *llm.templates, llm.domain, llm.params, llm.retry);
            timer.stage().completion_tokens = estimate_tokens(query_text);
            generated = true;
        } catch (const BackendError& e) {
            result.telemetry.notes.push_back(std::string("sparql generation failed: ") +
                                             e.what());
        }
    }
    if (generated) {
        try {
            SparqlSubsetQuery query = parse_sparql(query_text);
            StageTimer exec_timer(result.telemetry, "sparql_execute");
            result.bindings = execute(query, pyramid.instances());
        } catch (const SparqlError& e) {
            result.telemetry.notes.push_back(std::string("sparql rejected: ") + e.what());
        }
    }

    if (!result.bindings.empty()) {
        result.resolved_layer = Layer::Ontology;
        std::vector<std::string> lines;
        size_t rows = std::min<size_t>(result.bindings.rows.size(),
                                       size_t(config.max_binding_rows));
        for (size_t i = 0; i < rows; ++i)
            lines.push_back(join(result.bindings.rows[i], ", "));
        current_stage = "synthesize";
        StageTimer timer(result.telemetry, "synthesize");
        result.answer =
            synthesize_answer(question, Layer::Ontology, lines, llm, config, &result.telemetry);
        return result;
    }

    // Stage 2: knowledge graph with the agreement gate.
    current_stage = "kg_retrieve";
    {
        StageTimer timer(result.telemetry, "kg_retrieve");
        result.triplets = retrieve_kg(question, indexes, config.kg_top_k);
    }
    if (!result.triplets.empty()) {
        current_stage = "kg_agreement";
        bool agreed;
        {
            StageTimer timer(result.telemetry, "kg_agreement");
            agreed = kg_agreement(question, result.triplets, llm, &result.telemetry);
        }
        result.telemetry.agreement = agreed;
        if (agreed) {
            result.resolved_layer = Layer::Kg;
            std::vector<std::string> lines;
            for (const auto& t : result.triplets) lines.push_back(natural_line(t));
            current_stage = "synthesize";
            StageTimer synth(result.telemetry, "synthesize");
            result.answer =
                synthesize_answer(question, Layer::Kg, lines, llm, config, &result.telemetry);
            return result;
        }
        result.triplets.clear();
    }

    // Stage 3: raw text.
    current_stage = "text_retrieve";
    {
        StageTimer timer(result.telemetry, "text_retrieve");
        result.chunks = retrieve_text(question, indexes, config.text_top_k);
    }
    result.resolved_layer = Layer::RawText;
    std::vector<std::string> lines;
    for (const auto& c : result.chunks) lines.push_back(c.text);
    current_stage = "synthesize";
    StageTimer synth(result.telemetry, "synthesize");
    result.answer =
        synthesize_answer(question, Layer::RawText, lines, llm, config, &result.telemetry);
    return result;
}

}  // namespace

AnsweredQuery answer(const std::string& question, PyramidIndexes& indexes,
                     const LlmContext& llm, const QueryConfig& config) {
    if (trim(question).empty()) throw UsageError("answer: question is empty");
    std::string stage = "start";
    try {
        return answer_impl(question, indexes, llm, config, stage);
    } catch (const BackendError& e) {
        // Stage-local fall-through already happened inside answer_impl;
        // reaching here means the backend is down outright.
        throw BackendError(e.kind(), "backend outage at stage '" + stage + "': " + e.what());
    }
}

}  // namespace polyrag
