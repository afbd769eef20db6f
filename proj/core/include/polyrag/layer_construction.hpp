#pragma once
// Initial layer construction: ontology instances from every (class, property)
// pair over every paragraph, and KG triplets through the paraphrase →
// entity/relation → disambiguation cascade.

#include <array>
#include <string>
#include <vector>

#include "polyrag/llm.hpp"
#include "polyrag/pyramid.hpp"

namespace polyrag {

// Everything a pipeline stage needs to talk to the LLM.
struct LlmContext {
    ChatBackend* backend = nullptr;
    const TemplateSet* templates = nullptr;
    std::string domain = "general";
    std::string examples;  // optional few-shot block; prefixed with a space when set
    CompletionParams params;
    RetryPolicy retry;

    std::string examples_slot() const {
        return examples.empty() ? std::string() : " " + examples;
    }
};

struct BuildReport {
    struct StageCounts {
        int prompts = 0;
        int accepted = 0;
        int rejected = 0;
    };
    std::map<std::string, StageCounts> stages;
    std::vector<std::string> skipped_chunks;    // backend failure, pipeline continued
    std::vector<std::string> low_yield_chunks;  // paraphrase produced no claims
    std::vector<std::pair<std::string, std::string>> rejected_lines;  // (stage, line)
    std::vector<std::string> flagged_triplets;  // head/tail outside the entity list
    std::vector<std::string> warnings;

    std::string to_json_string() const;
};

// One instance per parsed `subject | property | value` line, deduplicated on
// exact (subject, property, value) with first-seen provenance. Backend
// failures skip the chunk and are recorded; an empty pair set is an error.
std::vector<OntologyInstance> extract_instances(const OntologySchema& schema,
                                                const std::vector<TextChunk>& chunks,
                                                const LlmContext& llm, BuildReport& report);

// Same extraction restricted to a single (class, property) pair; used when a
// completion proposal lands.
std::vector<OntologyInstance> extract_instances_for_pair(
    const OntologySchema& schema, const std::string& cls, const std::string& property,
    const std::vector<TextChunk>& chunks, const LlmContext& llm, BuildReport& report);

// Factual-claim sentences, one per non-empty response line.
std::vector<std::string> paraphrase(const TextChunk& chunk, const LlmContext& llm);

// Trimmed entities, case-insensitive duplicates removed; entities containing
// commas are rejected into the report.
std::vector<std::string> extract_entities(const std::vector<std::string>& claims,
                                          const LlmContext& llm, BuildReport& report);

struct RawTriplets {
    std::vector<std::array<std::string, 3>> triplets;
    std::vector<size_t> flagged;  // indices with a head or tail outside the entities
};

// Relation completion over the claims; triplets referencing unknown entities
// are kept but flagged. Empty claims mean no backend call.
RawTriplets complete_relations(const std::vector<std::string>& claims,
                               const std::vector<std::string>& entities,
                               const LlmContext& llm, BuildReport& report);

// Exact-duplicate pre-pass, then the disambiguation prompt. A response that
// parses to zero triplets keeps the originals and logs a warning.
std::vector<std::array<std::string, 3>> disambiguate(
    const std::vector<std::array<std::string, 3>>& triplets,
    const std::vector<std::string>& entities, const LlmContext& llm, BuildReport& report);

// Full cascade per chunk with provenance stamped; cross-chunk exact
// duplicates are removed by the caller's insertion order (first chunk wins).
// Returned triplets carry no ids; the pyramid assigns them on insert.
std::vector<KgTriplet> extract_kg(const std::vector<TextChunk>& chunks, const LlmContext& llm,
                                  BuildReport& report);

}  // namespace polyrag
