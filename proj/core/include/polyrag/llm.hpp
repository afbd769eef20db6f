#pragma once
// Chat-completion contract over remote backends and a deterministic scripted
// mock, prompt-template rendering, and parsers for every structured output
// format the pipeline consumes.

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "polyrag/error.hpp"

namespace polyrag {

struct PromptTemplate {
    std::string name;
    std::vector<std::string> slots;  // ordered slot names
    std::string body;                // text with {slot} placeholders
};

// Every placeholder in the body must appear in slots and vice versa.
void validate_template(const PromptTemplate& tpl);

// Exact single-pass substitution; braces inside values are never re-expanded.
// Missing or extra slot values raise UsageError naming the slot.
std::string render(const PromptTemplate& tpl,
                   const std::map<std::string, std::string>& slot_values);

// Rough token estimate (~4 bytes per token) for context budgeting.
int estimate_tokens(const std::string& text);

struct CompletionParams {
    double temperature = 0.0;
    int max_tokens = 0;           // 0 = provider default
    std::optional<uint64_t> seed;
    std::string tag;              // template name; used for scripted matching
};

struct Completion {
    std::string text;
    bool truncated = false;
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct BackendCapabilities {
    int max_context_tokens = 128000;
    bool supports_system_message = true;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string id() const = 0;
    virtual BackendCapabilities capabilities() const = 0;
    // Single attempt; classified BackendError on failure.
    virtual Completion complete_once(const std::string& prompt,
                                     const CompletionParams& params) = 0;
};

struct RetryPolicy {
    int max_retries = 2;
    int backoff_ms = 100;  // doubles per attempt
};

// Context pre-check plus retry loop: transient transport and rate-limit
// errors are retried with exponential backoff; everything else propagates.
Completion complete(ChatBackend& backend, const std::string& prompt,
                    const CompletionParams& params, const RetryPolicy& retry = {});

// ---- Scripted backend (offline tests and the bundled fixture) ----

struct ScriptRule {
    std::string template_name;  // empty = any template
    std::string substring;      // empty = no substring condition
    std::string regex_text;     // empty = no regex condition
    std::string response;
    std::string error_kind;     // "", or transport|rate_limit|context_overflow|contract
    bool truncated = false;
};

// First matching rule wins; an optional default covers everything else.
class ScriptedBackend : public ChatBackend {
public:
    ScriptedBackend(std::vector<ScriptRule> rules, std::optional<ScriptRule> fallback);
    static std::shared_ptr<ScriptedBackend> from_file(const std::string& path);

    std::string id() const override { return "scripted"; }
    BackendCapabilities capabilities() const override { return {1 << 24, true}; }
    Completion complete_once(const std::string& prompt,
                             const CompletionParams& params) override;

private:
    struct CompiledRule {
        ScriptRule rule;
        std::optional<std::regex> regex;
    };
    Completion apply(const ScriptRule& rule) const;

    std::vector<CompiledRule> rules_;
    std::optional<ScriptRule> fallback_;
};

// ---- Output parsers ----

struct TripletParse {
    std::vector<std::array<std::string, 3>> accepted;  // (head, relation, tail)
    std::vector<std::string> rejected;                 // original offending lines
};

// Splits each line on commas into exactly 3 trimmed non-empty parts; lines
// failing this land in `rejected` rather than being dropped.
TripletParse parse_triplet_lines(const std::string& text);

// Leading yes/no token after stripping punctuation and filler; falls back to
// a whole-text scan when the lead is inconclusive. nullopt = unparseable.
std::optional<bool> parse_yes_no(const std::string& text);

// Content of the first ``` fence if present, otherwise the trimmed text.
std::string strip_code_fences(const std::string& text);

// ---- Template registry ----

class TemplateSet {
public:
    // Built-in defaults for every prompt the pipeline renders.
    static TemplateSet builtin();
    // Built-ins overlaid with `<name>.txt` files from a directory.
    static TemplateSet with_overrides(const std::string& dir);

    const PromptTemplate& get(const std::string& name) const;
    const std::map<std::string, PromptTemplate>& all() const { return templates_; }

private:
    std::map<std::string, PromptTemplate> templates_;
};

// Placeholder names found in a template body, in order of first appearance.
std::vector<std::string> scan_placeholders(const std::string& body);

const std::vector<PromptTemplate>& default_templates();

}  // namespace polyrag
