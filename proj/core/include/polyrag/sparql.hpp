#pragma once
// Restricted SPARQL evaluation over the ontology instance store: basic graph
// patterns, equality / case-insensitive-contains filters, and LIMIT. The
// subset is small enough to verify against a brute-force join.

#include <optional>
#include <string>
#include <vector>

#include "polyrag/llm.hpp"
#include "polyrag/pyramid.hpp"

namespace polyrag {

struct SparqlTerm {
    enum class Kind { Variable, Iri, Literal };
    Kind kind = Kind::Iri;
    std::string text;  // variable name without '?', IRI local name, or literal

    bool is_var() const { return kind == Kind::Variable; }
    bool operator==(const SparqlTerm&) const = default;
};

struct TriplePattern {
    SparqlTerm subject;
    SparqlTerm property;
    SparqlTerm value;

    bool operator==(const TriplePattern&) const = default;
};

struct SparqlFilter {
    enum class Op { Equals, ContainsCI };
    std::string variable;
    Op op = Op::Equals;
    std::string literal;

    bool operator==(const SparqlFilter&) const = default;
};

struct SparqlSubsetQuery {
    std::vector<std::string> select_vars;
    std::vector<TriplePattern> patterns;
    std::vector<SparqlFilter> filters;
    std::optional<int64_t> limit;

    bool operator==(const SparqlSubsetQuery&) const = default;
};

struct BindingTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;  // deduplicated, sorted

    bool empty() const { return rows.empty(); }
    bool operator==(const BindingTable&) const = default;
};

enum class SparqlErrorKind { Unsupported, Malformed };

class SparqlError : public Error {
public:
    SparqlError(SparqlErrorKind kind, const std::string& token, const std::string& message)
        : Error(ErrorClass::Usage, message), kind_(kind), token_(token) {}
    SparqlErrorKind kind() const { return kind_; }
    const std::string& token() const { return token_; }

private:
    SparqlErrorKind kind_;
    std::string token_;
};

// Accepts: SELECT ?v… WHERE { pattern ('.' pattern)* FILTER(…)* } LIMIT n.
// Anything outside the subset raises Unsupported naming the construct;
// syntax problems raise Malformed. IRIs are reduced to their local names.
SparqlSubsetQuery parse_sparql(const std::string& text);

// Canonical form; parse_sparql(print_sparql(q)) == q.
std::string print_sparql(const SparqlSubsetQuery& query);

// Natural join of pattern matches over (subject, property, value) facts,
// filters applied, projected, deduplicated, rows sorted, then limited.
// No match yields an empty table, never an error.
BindingTable execute(const SparqlSubsetQuery& query,
                     const std::vector<OntologyInstance>& instances);

// Renders the ontology-query prompt and returns the backend's text with code
// fences stripped. The schema must validate.
std::string generate_sparql(const std::string& question, const OntologySchema& schema,
                            ChatBackend& backend, const TemplateSet& templates,
                            const std::string& domain,
                            const CompletionParams& params = {}, const RetryPolicy& retry = {});

}  // namespace polyrag
