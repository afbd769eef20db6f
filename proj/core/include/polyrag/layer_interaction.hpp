#pragma once
// Cross-layer interaction: knowledge completion (divergence ranking,
// clustering, schema-update proposals) and knowledge condensation (anchor
// neighborhoods summarized into fewer triplets).

#include <optional>
#include <string>
#include <vector>

#include "polyrag/embedding.hpp"
#include "polyrag/gaussian.hpp"
#include "polyrag/kmedoids.hpp"
#include "polyrag/layer_construction.hpp"
#include "polyrag/pyramid.hpp"

namespace polyrag {

// One phrase per (class, property) pair: "{class} {property}", with the
// property's underscores turned into spaces.
std::vector<PhrasePoint> ontology_phrases(const OntologySchema& schema,
                                          EmbeddingProvider& embedder);

// One phrase per triplet: "{head} {relation}"; duplicates collapse with
// multiplicity recorded and first-seen source_ref.
std::vector<PhrasePoint> kg_phrases(const std::vector<KgTriplet>& kg,
                                    EmbeddingProvider& embedder);

struct CompletionCandidate {
    PhrasePoint point;  // origin = Kg
    double priority = 0.0;
    std::optional<size_t> cluster_id;
    bool selected = false;
};

struct RankParams {
    double ridge = 1e-4;
    int max_dim = 8;
    double select_fraction = 0.2;            // top fraction of KG points
    std::optional<double> select_threshold;  // absolute override
};

struct RankResult {
    std::vector<CompletionCandidate> candidates;  // sorted by priority, descending
    size_t selected_count = 0;
    GaussianModel ontology_model;
    GaussianModel kg_model;
};

// Raised when a layer lacks the two distinct points a fit needs; callers
// skip completion and note it in the report.
struct CompletionSkipped : Error {
    explicit CompletionSkipped(const std::string& m) : Error(ErrorClass::Usage, m) {}
};

// Fits one Gaussian per layer on a shared pooled-PCA projection (inputs are
// L2-normalized first, matching the cosine geometry), scores every KG point,
// sorts descending and marks the selected head of the list.
RankResult rank_candidates(const std::vector<PhrasePoint>& o_points,
                           const std::vector<PhrasePoint>& k_points, const RankParams& params);

struct SchemaProposal {
    enum class Status { Pending, Accepted, Rejected };
    std::string proposed_class;
    std::string proposed_property;
    std::vector<std::string> supporting_triplets;
    std::string medoid_phrase;
    Status status = Status::Pending;
};

struct CandidateCluster {
    CompletionCandidate medoid;
    std::vector<CompletionCandidate> members;
};

struct InteractionLog {
    std::vector<std::string> notes;
    std::vector<std::string> warnings;
};

// One naming prompt per cluster; unparseable responses are skipped and
// proposals that collide with an existing (class, property) pair are dropped.
std::vector<SchemaProposal> propose_schema_updates(const std::vector<CandidateCluster>& clusters,
                                                   const OntologySchema& schema,
                                                   const LlmContext& llm, InteractionLog& log);

// An accepted proposal adds the pair to the schema (as a text data property,
// creating the class when new) and re-runs instance extraction restricted to
// it. Anything but Accepted leaves the pyramid untouched.
size_t apply_proposal(KnowledgePyramid& pyramid, const SchemaProposal& proposal,
                      const LlmContext& llm, BuildReport& report);

struct CompletionConfig {
    double ridge = 1e-4;
    int max_dim = 8;
    double select_fraction = 0.2;
    std::optional<double> select_threshold;
    int max_iterations = 2;
    bool auto_accept = false;
    std::optional<size_t> kmedoids_k;  // default ceil(sqrt(selected/2))
    uint64_t seed = 42;
    bool refit_each_iteration = true;
};

struct CompletionIteration {
    struct ClusterLog {
        std::string medoid_phrase;
        std::vector<std::string> member_refs;
    };
    std::vector<std::pair<std::string, double>> score_map;  // point source_ref -> Pr
    std::vector<ClusterLog> clusters;
    std::vector<SchemaProposal> proposals;
    size_t accepted = 0;
    std::vector<std::string> notes;
};

struct CompletionReport {
    std::vector<CompletionIteration> iterations;
    std::string to_json_lines() const;   // one JSON object per iteration
    std::string score_map_json() const;  // last iteration's point -> Pr map
};

// Iterates rank -> cluster -> propose -> apply until max_iterations or an
// iteration accepts nothing.
CompletionReport run_completion(KnowledgePyramid& pyramid, const CompletionConfig& config,
                                const LlmContext& llm, EmbeddingProvider& embedder);

struct CondensationRecord {
    std::pair<std::string, std::string> anchor;  // (class, property)
    std::vector<std::string> input_triplet_ids;
    std::vector<KgTriplet> output_triplets;
    int token_delta = 0;
};

struct CondensationReport {
    std::vector<CondensationRecord> records;
    std::vector<std::string> warnings;
    std::string to_json_lines() const;
};

// Per (class, property) anchor: embed the anchor phrase, take the k nearest
// not-yet-condensed triplets by head+relation phrase, summarize them through
// the condensation prompt, and replace inputs with outputs stamping
// condensed_from. A response longer than its input, or unparseable, keeps
// the originals with a warning.
CondensationReport condense(KnowledgePyramid& pyramid, int k_neighbors, const LlmContext& llm,
                            EmbeddingProvider& embedder);

}  // namespace polyrag
