#include "polyrag/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "polyrag/text.hpp"

namespace polyrag {

namespace {

// Flat TOML subset: [section] headers, key = value lines, # comments,
// quoted strings, numbers and booleans.
std::map<std::string, std::string> parse_toml_subset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file '" + path + "' not readable");

    std::map<std::string, std::string> values;
    std::string section;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": malformed section header");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (!value.empty() && value.front() == '"') {
            size_t close = value.find('"', 1);
            if (close == std::string::npos)
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unterminated string");
            value = value.substr(1, close - 1);
        } else {
            size_t hash = value.find('#');
            if (hash != std::string::npos) value = trim(value.substr(0, hash));
        }
        values[section.empty() ? key : section + "." + key] = value;
    }
    return values;
}

std::string env_key(const std::string& dotted) {
    std::string out = "POLYRAG_";
    for (char c : dotted)
        out.push_back(c == '.' ? '_' : char(std::toupper(static_cast<unsigned char>(c))));
    return out;
}

class Reader {
public:
    explicit Reader(std::map<std::string, std::string> values) : values_(std::move(values)) {}

    std::optional<std::string> raw(const std::string& key) const {
        if (const char* env = std::getenv(env_key(key).c_str())) return std::string(env);
        auto it = values_.find(key);
        if (it != values_.end()) return it->second;
        return std::nullopt;
    }
    void str(const std::string& key, std::string& out) const {
        if (auto v = raw(key)) out = *v;
    }
    void boolean(const std::string& key, bool& out) const {
        if (auto v = raw(key)) {
            if (*v == "true") out = true;
            else if (*v == "false") out = false;
            else throw ConfigError("config " + key + ": expected true or false, got '" + *v + "'");
        }
    }
    template <typename T>
    void number(const std::string& key, T& out) const {
        if (auto v = raw(key)) {
            T parsed{};
            auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), parsed);
            if (ec != std::errc{} || p != v->data() + v->size())
                throw ConfigError("config " + key + ": expected a number, got '" + *v + "'");
            out = parsed;
        }
    }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace

PipelineConfig PipelineConfig::load(const std::string& path) {
    std::map<std::string, std::string> values;
    if (!path.empty()) values = parse_toml_subset(path);
    Reader r(std::move(values));

    PipelineConfig c;
    r.str("domain", c.domain);
    r.number("seed", c.seed);
    r.str("templates.dir", c.template_dir);
    r.str("templates.examples", c.examples_block);

    r.str("embedding.provider", c.embedding_provider);
    r.number("embedding.dim", c.embedding_dim);
    r.str("embedding.endpoint", c.embedding_endpoint);
    r.str("embedding.model", c.embedding_model);
    r.str("embedding.api_key_env", c.embedding_api_key_env);
    r.number("embedding.batch_size", c.embedding_batch_size);
    r.number("embedding.timeout_ms", c.embedding_timeout_ms);

    r.str("chat.provider", c.chat_provider);
    r.str("chat.script", c.script_path);
    r.str("chat.endpoint", c.chat_endpoint);
    r.str("chat.model", c.chat_model);
    r.str("chat.api_key_env", c.chat_api_key_env);
    r.number("chat.timeout_ms", c.chat_timeout_ms);
    r.number("chat.max_context_tokens", c.max_context_tokens);
    r.number("chat.retries", c.retries);
    r.number("chat.backoff_ms", c.backoff_ms);
    r.number("chat.temperature", c.temperature);

    r.number("gaussian.ridge", c.ridge);
    r.number("gaussian.max_dim", c.max_dim);
    r.boolean("gaussian.refit_each_iteration", c.refit_each_iteration);

    r.number("completion.select_fraction", c.select_fraction);
    if (auto v = r.raw("completion.select_threshold")) {
        double parsed = 0;
        auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), parsed);
        if (ec != std::errc{} || p != v->data() + v->size())
            throw ConfigError("config completion.select_threshold: not a number");
        c.select_threshold = parsed;
    }
    r.number("completion.max_iterations", c.max_iterations);
    r.boolean("completion.auto_accept", c.auto_accept);
    if (auto v = r.raw("completion.kmedoids_k")) {
        size_t parsed = 0;
        auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), parsed);
        if (ec != std::errc{} || p != v->data() + v->size())
            throw ConfigError("config completion.kmedoids_k: not a number");
        c.kmedoids_k = parsed;
    }

    r.number("condensation.k_neighbors", c.k_neighbors);

    r.number("query.kg_top_k", c.query.kg_top_k);
    r.number("query.text_top_k", c.query.text_top_k);
    r.number("query.max_binding_rows", c.query.max_binding_rows);
    r.str("query.abstention", c.query.abstention);

    // Paths in the file resolve against the file's own directory.
    if (!path.empty()) {
        auto resolve = [&](std::string& p) {
            if (!p.empty() && std::filesystem::path(p).is_relative())
                p = (std::filesystem::path(path).parent_path() / p).string();
        };
        resolve(c.script_path);
        resolve(c.template_dir);
    }

    c.validate();
    return c;
}

void PipelineConfig::validate() const {
    if (query.kg_top_k < 1 || query.text_top_k < 1 || k_neighbors < 1)
        throw ConfigError("all retrieval k values must be >= 1");
    if (ridge <= 0.0) throw ConfigError("gaussian.ridge must be > 0");
    if (max_dim < 1) throw ConfigError("gaussian.max_dim must be >= 1");
    if (embedding_dim < 1) throw ConfigError("embedding.dim must be >= 1");
    if (select_fraction <= 0.0 || select_fraction > 1.0)
        throw ConfigError("completion.select_fraction must be in (0, 1]");
    if (max_iterations < 0) throw ConfigError("completion.max_iterations must be >= 0");
    if (embedding_provider != "local" && embedding_provider != "http")
        throw ConfigError("embedding.provider must be local or http");
    if (chat_provider != "scripted" && chat_provider != "http")
        throw ConfigError("chat.provider must be scripted or http");
}

std::map<std::string, std::string> PipelineConfig::snapshot() const {
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", v);
        return std::string(buf);
    };
    std::map<std::string, std::string> s;
    s["domain"] = domain;
    s["seed"] = std::to_string(seed);
    s["embedding.provider"] = embedding_provider;
    s["embedding.dim"] = std::to_string(embedding_dim);
    s["chat.provider"] = chat_provider;
    s["chat.temperature"] = fmt(temperature);
    s["gaussian.ridge"] = fmt(ridge);
    s["gaussian.max_dim"] = std::to_string(max_dim);
    s["gaussian.refit_each_iteration"] = refit_each_iteration ? "true" : "false";
    s["completion.select_fraction"] = fmt(select_fraction);
    if (select_threshold) s["completion.select_threshold"] = fmt(*select_threshold);
    s["completion.max_iterations"] = std::to_string(max_iterations);
    if (kmedoids_k) s["completion.kmedoids_k"] = std::to_string(*kmedoids_k);
    s["condensation.k_neighbors"] = std::to_string(k_neighbors);
    s["query.kg_top_k"] = std::to_string(query.kg_top_k);
    s["query.text_top_k"] = std::to_string(query.text_top_k);
    s["query.max_binding_rows"] = std::to_string(query.max_binding_rows);
    return s;
}

CompletionConfig PipelineConfig::completion_config() const {
    CompletionConfig cc;
    cc.ridge = ridge;
    cc.max_dim = max_dim;
    cc.select_fraction = select_fraction;
    cc.select_threshold = select_threshold;
    cc.max_iterations = max_iterations;
    cc.auto_accept = auto_accept;
    cc.kmedoids_k = kmedoids_k;
    cc.seed = seed;
    cc.refit_each_iteration = refit_each_iteration;
    return cc;
}

RetryPolicy PipelineConfig::retry_policy() const { return {retries, backoff_ms}; }

std::shared_ptr<EmbeddingProvider> make_embedder(const PipelineConfig& config) {
    if (config.embedding_provider == "local")
        return std::make_shared<LocalHashEmbedder>(config.embedding_dim, config.seed);
    HttpEmbeddingConfig http;
    http.base_url = config.embedding_endpoint;
    http.model = config.embedding_model;
    if (const char* key = std::getenv(config.embedding_api_key_env.c_str()))
        http.api_key = key;
    http.timeout_ms = config.embedding_timeout_ms;
    http.batch_size = config.embedding_batch_size;
    http.expected_dim = config.embedding_dim;
    return std::make_shared<HttpEmbeddingProvider>(http);
}

std::shared_ptr<ChatBackend> make_chat_backend(const PipelineConfig& config) {
    if (config.chat_provider == "scripted") {
        if (config.script_path.empty())
            throw ConfigError("chat.provider = scripted requires chat.script");
        return ScriptedBackend::from_file(config.script_path);
    }
    HttpChatConfig http;
    http.base_url = config.chat_endpoint;
    http.model = config.chat_model;
    if (const char* key = std::getenv(config.chat_api_key_env.c_str())) http.api_key = key;
    http.timeout_ms = config.chat_timeout_ms;
    http.max_context_tokens = config.max_context_tokens;
    return std::make_shared<HttpChatBackend>(http);
}

StageClock StageClock::for_config(const PipelineConfig& config) {
    return StageClock(config.chat_provider == "scripted" &&
                      config.embedding_provider == "local");
}

std::string StageClock::stamp() {
    ++counter_;
    if (deterministic_) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "run+%03d", counter_);
        return buf;
    }
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

}  // namespace polyrag
