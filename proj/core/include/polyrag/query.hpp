#pragma once
// Waterfall multi-level querying: ontology SPARQL first, then KG retrieval
// gated by an LLM agreement check, then raw-text retrieval, then answer
// synthesis over whichever evidence resolved.

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "polyrag/embedding.hpp"
#include "polyrag/layer_construction.hpp"
#include "polyrag/pyramid.hpp"
#include "polyrag/sparql.hpp"

namespace polyrag {

enum class Layer { Ontology, Kg, RawText };
const char* layer_name(Layer layer);

struct QueryConfig {
    int kg_top_k = 10;
    int text_top_k = 5;
    int max_binding_rows = 50;  // ontology evidence cap before synthesis
    std::string abstention = "No supporting evidence was found.";
};

struct Telemetry {
    struct Stage {
        std::string name;  // sparql_generate, sparql_execute, kg_retrieve,
                           // kg_agreement, text_retrieve, synthesize
        double millis = 0.0;
        int prompt_tokens = 0;
        int completion_tokens = 0;
    };
    std::vector<Stage> stages;
    std::optional<bool> agreement;
    std::vector<std::string> notes;  // degradations (parse failures etc.)

    bool has_stage(const std::string& name) const;
};

struct AnsweredQuery {
    std::string question;
    std::string answer;
    Layer resolved_layer = Layer::RawText;
    BindingTable bindings;            // Ontology evidence
    std::vector<KgTriplet> triplets;  // KG evidence
    std::vector<TextChunk> chunks;    // raw-text evidence
    Telemetry telemetry;
};

// Lazily built embedding indexes over an immutable pyramid; safe to share
// across concurrent queries.
class PyramidIndexes {
public:
    PyramidIndexes(const KnowledgePyramid& pyramid, EmbeddingProvider& embedder)
        : pyramid_(pyramid), embedder_(embedder) {}

    const VectorIndex& kg_index();
    const VectorIndex& chunk_index();
    EmbeddingProvider& embedder() { return embedder_; }
    const KnowledgePyramid& pyramid() const { return pyramid_; }

private:
    const KnowledgePyramid& pyramid_;
    EmbeddingProvider& embedder_;
    std::mutex mutex_;
    std::optional<VectorIndex> kg_;
    std::optional<VectorIndex> chunks_;
};

// Triplets are serialized as natural-language lines into the agreement
// prompt; an unparseable verdict counts as "no".
bool kg_agreement(const std::string& question, const std::vector<KgTriplet>& triplets,
                  const LlmContext& llm, Telemetry* telemetry = nullptr);

std::vector<KgTriplet> retrieve_kg(const std::string& question, PyramidIndexes& indexes, int k);
std::vector<TextChunk> retrieve_text(const std::string& question, PyramidIndexes& indexes, int k);

// Layer-specific synthesis; empty evidence returns the abstention string.
std::string synthesize_answer(const std::string& question, Layer layer,
                              const std::vector<std::string>& evidence_lines,
                              const LlmContext& llm, const QueryConfig& config,
                              Telemetry* telemetry = nullptr);

// Algorithm: ontology bindings win outright; otherwise KG retrieval plus the
// agreement gate; otherwise raw text. Exactly one layer resolves, and no
// work attributable to layers below it is performed.
AnsweredQuery answer(const std::string& question, PyramidIndexes& indexes,
                     const LlmContext& llm, const QueryConfig& config);

}  // namespace polyrag
