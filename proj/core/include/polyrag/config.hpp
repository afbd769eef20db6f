#pragma once
// Pipeline configuration: a small TOML-style file, environment-variable
// overrides for secrets, and factories wiring providers together. Flags on
// the CLI override whatever is loaded here.

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "polyrag/embedding.hpp"
#include "polyrag/http_providers.hpp"
#include "polyrag/layer_construction.hpp"
#include "polyrag/layer_interaction.hpp"
#include "polyrag/query.hpp"

namespace polyrag {

struct PipelineConfig {
    std::string domain = "general";
    uint64_t seed = 42;
    std::string template_dir;
    std::string examples_block;  // optional few-shot text for {examples} slots

    // [embedding]
    std::string embedding_provider = "local";  // local | http
    int embedding_dim = 64;
    std::string embedding_endpoint;
    std::string embedding_model;
    std::string embedding_api_key_env = "POLYRAG_EMBEDDING_API_KEY";
    int embedding_batch_size = 16;
    int embedding_timeout_ms = 30000;

    // [chat]
    std::string chat_provider = "scripted";  // scripted | http
    std::string script_path;
    std::string chat_endpoint;
    std::string chat_model;
    std::string chat_api_key_env = "POLYRAG_CHAT_API_KEY";
    int chat_timeout_ms = 30000;
    int max_context_tokens = 8192;
    int retries = 2;
    int backoff_ms = 100;
    double temperature = 0.0;

    // [gaussian]
    double ridge = 1e-4;
    int max_dim = 8;
    bool refit_each_iteration = true;

    // [completion]
    double select_fraction = 0.2;
    std::optional<double> select_threshold;
    int max_iterations = 2;
    bool auto_accept = false;
    std::optional<size_t> kmedoids_k;

    // [condensation]
    int k_neighbors = 10;

    // [query]
    QueryConfig query;  // kg_top_k = 10, text_top_k = 5

    // Reads the file (optional), then applies POLYRAG_<SECTION>_<KEY>
    // environment overrides, then validates invariants.
    static PipelineConfig load(const std::string& path);
    static PipelineConfig defaults() { return load(""); }

    void validate() const;
    // Flat key -> value view recorded into build metadata and eval reports.
    std::map<std::string, std::string> snapshot() const;

    CompletionConfig completion_config() const;
    RetryPolicy retry_policy() const;
};

std::shared_ptr<EmbeddingProvider> make_embedder(const PipelineConfig& config);
std::shared_ptr<ChatBackend> make_chat_backend(const PipelineConfig& config);

// Stage timestamps: wall clock normally, a logical counter when the whole
// pipeline is offline-deterministic (scripted chat + local embeddings), so
// repeated runs are byte-identical.
class StageClock {
public:
    explicit StageClock(bool deterministic) : deterministic_(deterministic) {}
    static StageClock for_config(const PipelineConfig& config);

    std::string stamp();

private:
    bool deterministic_;
    int counter_ = 0;
};

}  // namespace polyrag
