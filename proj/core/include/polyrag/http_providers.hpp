#pragma once
// Remote providers speaking the OpenAI-compatible HTTP shapes: a chat
// completion backend and a batched embedding provider.

#include <string>

#include "polyrag/embedding.hpp"
#include "polyrag/llm.hpp"

namespace polyrag {

struct HttpChatConfig {
    std::string base_url;  // scheme://host:port
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key;
    int timeout_ms = 30000;
    int max_context_tokens = 8192;
};

class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(HttpChatConfig config);

    std::string id() const override { return "http-chat/" + config_.model; }
    BackendCapabilities capabilities() const override {
        return {config_.max_context_tokens, true};
    }
    Completion complete_once(const std::string& prompt,
                             const CompletionParams& params) override;

private:
    HttpChatConfig config_;
};

struct HttpEmbeddingConfig {
    std::string base_url;
    std::string path = "/v1/embeddings";
    std::string model;
    std::string api_key;
    int timeout_ms = 30000;
    int batch_size = 16;
    int expected_dim = 0;  // contract-checked when > 0
};

class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(HttpEmbeddingConfig config);

    std::string id() const override { return "http-embed/" + config_.model; }
    int dim() const override { return config_.expected_dim; }
    Vector embed(const std::string& text) override;
    std::vector<Vector> embed_batch(const std::vector<std::string>& texts) override;

private:
    HttpEmbeddingConfig config_;
};

}  // namespace polyrag
