#include "polyrag/llm.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace polyrag {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool is_slot_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

std::vector<std::string> scan_placeholders(const std::string& body) {
    std::vector<std::string> found;
    std::set<std::string> seen;
    for (size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '{') continue;
        size_t j = i + 1;
        while (j < body.size() && is_slot_char(body[j])) ++j;
        if (j > i + 1 && j < body.size() && body[j] == '}') {
            std::string name = body.substr(i + 1, j - i - 1);
            if (seen.insert(name).second) found.push_back(name);
            i = j;
        }
    }
    return found;
}

void validate_template(const PromptTemplate& tpl) {
    auto placeholders = scan_placeholders(tpl.body);
    std::set<std::string> in_body(placeholders.begin(), placeholders.end());
    std::set<std::string> declared(tpl.slots.begin(), tpl.slots.end());
    for (const auto& p : in_body)
        if (!declared.count(p))
            throw UsageError("template '" + tpl.name + "': undeclared placeholder {" + p + "}");
    for (const auto& s : declared)
        if (!in_body.count(s))
            throw UsageError("template '" + tpl.name + "': slot '" + s + "' never used in body");
}

std::string render(const PromptTemplate& tpl,
                   const std::map<std::string, std::string>& slot_values) {
    std::set<std::string> declared(tpl.slots.begin(), tpl.slots.end());
    for (const auto& [k, _] : slot_values)
        if (!declared.count(k))
            throw UsageError("render '" + tpl.name + "': unknown slot '" + k + "'");
    for (const auto& s : tpl.slots)
        if (!slot_values.count(s))
            throw UsageError("render '" + tpl.name + "': missing slot '" + s + "'");

    std::string out;
    out.reserve(tpl.body.size());
    for (size_t i = 0; i < tpl.body.size(); ++i) {
        if (tpl.body[i] == '{') {
            size_t j = i + 1;
            while (j < tpl.body.size() && is_slot_char(tpl.body[j])) ++j;
            if (j > i + 1 && j < tpl.body.size() && tpl.body[j] == '}') {
                std::string name = tpl.body.substr(i + 1, j - i - 1);
                auto it = slot_values.find(name);
                if (it != slot_values.end()) {
                    out += it->second;  // verbatim, no re-expansion
                    i = j;
                    continue;
                }
            }
        }
        out.push_back(tpl.body[i]);
    }
    return out;
}

int estimate_tokens(const std::string& text) {
    return int((text.size() + 3) / 4);
}

Completion complete(ChatBackend& backend, const std::string& prompt,
                    const CompletionParams& params, const RetryPolicy& retry) {
    int cap = backend.capabilities().max_context_tokens;
    int estimated = estimate_tokens(prompt);
    if (estimated > cap)
        throw BackendError(BackendErrorKind::ContextOverflow,
                           "prompt of ~" + std::to_string(estimated) +
                               " tokens exceeds backend context of " + std::to_string(cap));
    for (int attempt = 0;; ++attempt) {
        try {
            return backend.complete_once(prompt, params);
        } catch (const BackendError& e) {
            if (!e.retryable() || attempt >= retry.max_retries) throw;
            if (retry.backoff_ms > 0)
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(retry.backoff_ms << attempt));
        }
    }
}

// ---- ScriptedBackend ----

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules,
                                 std::optional<ScriptRule> fallback)
    : fallback_(std::move(fallback)) {
    rules_.reserve(rules.size());
    for (auto& r : rules) {
        CompiledRule cr;
        if (!r.regex_text.empty()) cr.regex = std::regex(r.regex_text);
        cr.rule = std::move(r);
        rules_.push_back(std::move(cr));
    }
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("script file '" + path + "' not readable");
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("script file '" + path + "' is not valid JSON");

    auto parse_rule = [](const nlohmann::json& r) {
        ScriptRule rule;
        rule.template_name = r.value("template", "");
        rule.substring = r.value("substring", "");
        rule.regex_text = r.value("regex", "");
        rule.response = r.value("response", "");
        rule.error_kind = r.value("error", "");
        rule.truncated = r.value("truncated", false);
        return rule;
    };

    std::vector<ScriptRule> rules;
    for (const auto& r : doc.value("rules", nlohmann::json::array()))
        rules.push_back(parse_rule(r));
    std::optional<ScriptRule> fallback;
    if (doc.contains("default")) fallback = parse_rule(doc["default"]);
    return std::make_shared<ScriptedBackend>(std::move(rules), std::move(fallback));
}

Completion ScriptedBackend::apply(const ScriptRule& rule) const {
    if (!rule.error_kind.empty()) {
        if (rule.error_kind == "transport")
            throw BackendError(BackendErrorKind::Transport, "scripted transport failure");
        if (rule.error_kind == "rate_limit")
            throw BackendError(BackendErrorKind::RateLimit, "scripted rate limit");
        if (rule.error_kind == "context_overflow")
            throw BackendError(BackendErrorKind::ContextOverflow, "scripted context overflow");
        throw BackendError(BackendErrorKind::Contract, "scripted contract failure");
    }
    Completion c;
    c.text = rule.response;
    c.truncated = rule.truncated;
    c.completion_tokens = estimate_tokens(rule.response);
    return c;
}

Completion ScriptedBackend::complete_once(const std::string& prompt,
                                          const CompletionParams& params) {
    for (const auto& cr : rules_) {
        const auto& r = cr.rule;
        if (!r.template_name.empty() && r.template_name != params.tag) continue;
        if (!r.substring.empty() && prompt.find(r.substring) == std::string::npos) continue;
        if (cr.regex && !std::regex_search(prompt, *cr.regex)) continue;
        Completion c = apply(r);
        c.prompt_tokens = estimate_tokens(prompt);
        return c;
    }
    if (fallback_) {
        Completion c = apply(*fallback_);
        c.prompt_tokens = estimate_tokens(prompt);
        return c;
    }
    throw BackendError(BackendErrorKind::Contract,
                       "no scripted rule matched prompt tagged '" + params.tag + "'");
}

// ---- Parsers ----

TripletParse parse_triplet_lines(const std::string& text) {
    TripletParse out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        std::vector<std::string> parts;
        size_t start = 0;
        while (true) {
            size_t comma = t.find(',', start);
            if (comma == std::string::npos) {
                parts.push_back(trim(t.substr(start)));
                break;
            }
            parts.push_back(trim(t.substr(start, comma - start)));
            start = comma + 1;
        }
        bool ok = parts.size() == 3 &&
                  std::none_of(parts.begin(), parts.end(),
                               [](const std::string& p) { return p.empty(); });
        if (ok)
            out.accepted.push_back({parts[0], parts[1], parts[2]});
        else
            out.rejected.push_back(t);
    }
    return out;
}

std::optional<bool> parse_yes_no(const std::string& text) {
    static const std::set<std::string> filler = {"answer",   "response", "result", "verdict",
                                                 "justification", "the",  "a",     "my"};
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        if (std::isalpha(static_cast<unsigned char>(ch))) {
            cur.push_back(char(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);

    for (const auto& tok : tokens) {
        if (filler.count(tok)) continue;
        if (tok == "yes") return true;
        if (tok == "no") return false;
        break;  // lead token is something else; fall back to a whole-text scan
    }
    bool has_yes = std::find(tokens.begin(), tokens.end(), "yes") != tokens.end();
    bool has_no = std::find(tokens.begin(), tokens.end(), "no") != tokens.end();
    if (has_yes == has_no) return std::nullopt;  // both or neither
    return has_yes;
}

std::string strip_code_fences(const std::string& text) {
    size_t open = text.find("```");
    if (open == std::string::npos) return trim(text);
    size_t body_start = text.find('\n', open);
    if (body_start == std::string::npos) return trim(text);
    size_t close = text.find("```", body_start);
    if (close == std::string::npos) return trim(text.substr(body_start + 1));
    return trim(text.substr(body_start + 1, close - body_start - 1));
}

// ---- Template registry ----

TemplateSet TemplateSet::builtin() {
    TemplateSet set;
    for (const auto& tpl : default_templates()) set.templates_[tpl.name] = tpl;
    return set;
}

TemplateSet TemplateSet::with_overrides(const std::string& dir) {
    TemplateSet set = builtin();
    namespace fs = std::filesystem;
    if (!fs::exists(dir)) return set;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream in(path);
        std::ostringstream ss;
        ss << in.rdbuf();
        PromptTemplate tpl;
        tpl.name = path.stem().string();
        tpl.body = trim(ss.str());
        tpl.slots = scan_placeholders(tpl.body);
        validate_template(tpl);
        set.templates_[tpl.name] = std::move(tpl);
    }
    return set;
}

const PromptTemplate& TemplateSet::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("unknown prompt template '" + name + "'");
    return it->second;
}

}  // namespace polyrag
