#include "polyrag/http_providers.hpp"

#include <httplib.h>
#include <json.hpp>

namespace polyrag {

using nlohmann::json;

namespace {

json post_json(const std::string& base_url, const std::string& path,
               const std::string& api_key, int timeout_ms, const json& body) {
    httplib::Client client(base_url);
    client.set_connection_timeout(0, timeout_ms * 1000);
    client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res)
        throw BackendError(BackendErrorKind::Transport,
                           "no response from " + base_url + path + " (" +
                               httplib::to_string(res.error()) + ")");
    if (res->status == 429)
        throw BackendError(BackendErrorKind::RateLimit, "provider rate limit (429)");
    if (res->status >= 500)
        throw BackendError(BackendErrorKind::Transport,
                           "provider error " + std::to_string(res->status));
    if (res->status >= 400) {
        if (res->body.find("context_length") != std::string::npos ||
            res->body.find("maximum context") != std::string::npos)
            throw BackendError(BackendErrorKind::ContextOverflow, res->body);
        throw BackendError(BackendErrorKind::Contract,
                           "provider rejected request (" + std::to_string(res->status) +
                               "): " + res->body);
    }
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded())
        throw BackendError(BackendErrorKind::Contract, "provider returned invalid JSON");
    return parsed;
}

}  // namespace

HttpChatBackend::HttpChatBackend(HttpChatConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw ConfigError("chat provider: base_url is required");
}

Completion HttpChatBackend::complete_once(const std::string& prompt,
                                          const CompletionParams& params) {
    json body{{"model", config_.model},
              {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
              {"temperature", params.temperature}};
    if (params.max_tokens > 0) body["max_tokens"] = params.max_tokens;
    if (params.seed) body["seed"] = *params.seed;

    json res = post_json(config_.base_url, config_.path, config_.api_key,
                         config_.timeout_ms, body);
    if (!res.contains("choices") || res["choices"].empty())
        throw BackendError(BackendErrorKind::Contract, "chat response has no choices");
    const auto& choice = res["choices"][0];

    Completion out;
    out.text = choice.at("message").at("content").get<std::string>();
    out.truncated = choice.value("finish_reason", "stop") == "length";
    if (res.contains("usage")) {
        out.prompt_tokens = res["usage"].value("prompt_tokens", 0);
        out.completion_tokens = res["usage"].value("completion_tokens", 0);
    }
    return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEmbeddingConfig config)
    : config_(std::move(config)) {
    if (config_.base_url.empty()) throw ConfigError("embedding provider: base_url is required");
    if (config_.expected_dim <= 0)
        throw ConfigError("embedding provider: expected dimension must be configured");
    if (config_.batch_size < 1) throw ConfigError("embedding provider: batch_size must be >= 1");
}

Vector HttpEmbeddingProvider::embed(const std::string& text) {
    return embed_batch({text}).front();
}

std::vector<Vector> HttpEmbeddingProvider::embed_batch(const std::vector<std::string>& texts) {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (size_t start = 0; start < texts.size(); start += size_t(config_.batch_size)) {
        size_t end = std::min(texts.size(), start + size_t(config_.batch_size));
        json body{{"model", config_.model},
                  {"input", std::vector<std::string>(texts.begin() + long(start),
                                                     texts.begin() + long(end))}};
        json res = post_json(config_.base_url, config_.path, config_.api_key,
                             config_.timeout_ms, body);
        if (!res.contains("data") || res["data"].size() != end - start)
            throw BackendError(BackendErrorKind::Contract,
                               "embedding response size does not match batch");
        for (const auto& item : res["data"]) {
            auto values = item.at("embedding").get<std::vector<double>>();
            if (int(values.size()) != config_.expected_dim)
                throw BackendError(BackendErrorKind::Contract,
                                   "provider returned dimension " +
                                       std::to_string(values.size()) + ", config says " +
                                       std::to_string(config_.expected_dim));
            out.push_back(Eigen::Map<const Vector>(values.data(), long(values.size())));
            if (!out.back().allFinite())
                throw BackendError(BackendErrorKind::Contract,
                                   "provider returned non-finite embedding entries");
        }
    }
    return out;
}

}  // namespace polyrag
