#include "polyrag/sparql.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <set>

#include "polyrag/text.hpp"

namespace polyrag {

namespace {

// Constructs outside the subset, reported by name.
const std::set<std::string>& unsupported_keywords() {
    static const std::set<std::string> kw = {
        "OPTIONAL", "UNION",    "PREFIX",  "ORDER",  "GROUP",  "HAVING", "DISTINCT",
        "REDUCED",  "ASK",      "CONSTRUCT", "DESCRIBE", "BIND", "VALUES", "MINUS",
        "SERVICE",  "GRAPH",    "OFFSET",  "REGEX",  "STR",    "EXISTS", "NOT",
        "INSERT",   "DELETE",   "UNION"};
    return kw;
}

struct Token {
    enum class Kind { Word, Variable, Iri, Literal, Punct, Number, End };
    Kind kind = Kind::End;
    std::string text;
};

class Lexer {
public:
    explicit Lexer(const std::string& input) : in_(input) {}

    Token next() {
        skip_ws();
        if (pos_ >= in_.size()) return {Token::Kind::End, ""};
        char c = in_[pos_];
        if (c == '?' || c == '$') return lex_variable();
        if (c == '<') return lex_iri();
        if (c == '"' || c == '\'') return lex_literal(c);
        if (std::isdigit(static_cast<unsigned char>(c))) return lex_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return lex_word();
        ++pos_;
        return {Token::Kind::Punct, std::string(1, c)};
    }

private:
    void skip_ws() {
        while (pos_ < in_.size() &&
               std::isspace(static_cast<unsigned char>(in_[pos_])))
            ++pos_;
    }
    Token lex_variable() {
        size_t start = ++pos_;
        while (pos_ < in_.size() && (std::isalnum(static_cast<unsigned char>(in_[pos_])) ||
                                     in_[pos_] == '_'))
            ++pos_;
        if (pos_ == start)
            throw SparqlError(SparqlErrorKind::Malformed, "?", "empty variable name");
        return {Token::Kind::Variable, in_.substr(start, pos_ - start)};
    }
    Token lex_iri() {
        size_t close = in_.find('>', pos_);
        if (close == std::string::npos)
            throw SparqlError(SparqlErrorKind::Malformed, "<", "unterminated IRI");
        std::string body = in_.substr(pos_ + 1, close - pos_ - 1);
        pos_ = close + 1;
        return {Token::Kind::Iri, body};
    }
    Token lex_literal(char quote) {
        std::string out;
        ++pos_;
        while (pos_ < in_.size() && in_[pos_] != quote) {
            if (in_[pos_] == '\\' && pos_ + 1 < in_.size()) {
                out.push_back(in_[pos_ + 1]);
                pos_ += 2;
            } else {
                out.push_back(in_[pos_++]);
            }
        }
        if (pos_ >= in_.size())
            throw SparqlError(SparqlErrorKind::Malformed, "\"", "unterminated string literal");
        ++pos_;
        return {Token::Kind::Literal, out};
    }
    Token lex_number() {
        size_t start = pos_;
        while (pos_ < in_.size() && (std::isdigit(static_cast<unsigned char>(in_[pos_])) ||
                                     in_[pos_] == '.' || in_[pos_] == '-'))
            ++pos_;
        return {Token::Kind::Number, in_.substr(start, pos_ - start)};
    }
    Token lex_word() {
        size_t start = pos_;
        while (pos_ < in_.size() && (std::isalnum(static_cast<unsigned char>(in_[pos_])) ||
                                     in_[pos_] == '_' || in_[pos_] == ':'))
            ++pos_;
        return {Token::Kind::Word, in_.substr(start, pos_ - start)};
    }

    const std::string& in_;
    size_t pos_ = 0;
};

std::string upper(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return char(std::toupper(c)); });
    return out;
}

// "http://ns#works_in", "ns:works_in" and "works_in" all reduce to the same
// local name; generated queries are inconsistent about qualification.
std::string local_name(const std::string& iri) {
    size_t cut = iri.find_last_of("#/:");
    return cut == std::string::npos ? iri : iri.substr(cut + 1);
}

class Parser {
public:
    explicit Parser(const std::string& input) : lexer_(input) { advance(); }

    SparqlSubsetQuery parse() {
        expect_keyword("SELECT");
        SparqlSubsetQuery q;
        while (tok_.kind == Token::Kind::Variable) {
            q.select_vars.push_back(tok_.text);
            advance();
        }
        if (q.select_vars.empty())
            throw SparqlError(SparqlErrorKind::Malformed, tok_.text,
                              "SELECT needs at least one ?variable");
        expect_keyword("WHERE");
        expect_punct("{");
        while (!is_punct("}")) {
            if (tok_.kind == Token::Kind::End)
                throw SparqlError(SparqlErrorKind::Malformed, "}", "unbalanced brace");
            if (tok_.kind == Token::Kind::Word && upper(tok_.text) == "FILTER") {
                advance();
                q.filters.push_back(parse_filter());
            } else {
                q.patterns.push_back(parse_pattern());
            }
            if (is_punct(".")) advance();
        }
        advance();  // '}'
        if (tok_.kind == Token::Kind::Word && upper(tok_.text) == "LIMIT") {
            advance();
            if (tok_.kind != Token::Kind::Number)
                throw SparqlError(SparqlErrorKind::Malformed, tok_.text,
                                  "LIMIT needs a positive integer");
            int64_t n = 0;
            auto [p, ec] = std::from_chars(tok_.text.data(),
                                           tok_.text.data() + tok_.text.size(), n);
            if (ec != std::errc{} || p != tok_.text.data() + tok_.text.size() || n < 1)
                throw SparqlError(SparqlErrorKind::Malformed, tok_.text,
                                  "LIMIT needs a positive integer");
            q.limit = n;
            advance();
        }
        if (tok_.kind != Token::Kind::End)
            throw SparqlError(SparqlErrorKind::Malformed, tok_.text,
                              "unexpected trailing token '" + tok_.text + "'");
        validate(q);
        return q;
    }

private:
    void advance() { tok_ = lexer_.next(); }

    void check_supported(const Token& t) {
        if (t.kind == Token::Kind::Word && unsupported_keywords().count(upper(t.text)))
            throw SparqlError(SparqlErrorKind::Unsupported, upper(t.text),
                              "construct '" + upper(t.text) + "' is outside the subset");
    }

    void expect_keyword(const std::string& kw) {
        check_supported(tok_);
        if (tok_.kind != Token::Kind::Word || upper(tok_.text) != kw)
            throw SparqlError(SparqlErrorKind::Malformed, tok_.text,
                              "expected " + kw + ", got '" + tok_.text + "'");
        advance();
    }
    bool is_punct(const std::string& p) const {
        return tok_.kind == Token::Kind::Punct && tok_.text == p;
    }
    void expect_punct(const std::string& p) {
        if (!is_punct(p))
            throw SparqlError(SparqlErrorKind::Malformed, tok_.text,
                              "expected '" + p + "', got '" + tok_.text + "'");
        advance();
    }

    SparqlTerm parse_term() {
        check_supported(tok_);
        SparqlTerm term;
        switch (tok_.kind) {
            case Token::Kind::Variable:
                term = {SparqlTerm::Kind::Variable, tok_.text};
                break;
            case Token::Kind::Iri:
                term = {SparqlTerm::Kind::Iri, local_name(tok_.text)};
                break;
            case Token::Kind::Literal:
            case Token::Kind::Number:
                term = {SparqlTerm::Kind::Literal, tok_.text};
                break;
            case Token::Kind::Word:
                term = {SparqlTerm::Kind::Iri, local_name(tok_.text)};
                break;
            default:
                throw SparqlError(SparqlErrorKind::Malformed, tok_.text,
                                  "expected a term, got '" + tok_.text + "'");
        }
        advance();
        return term;
    }

    TriplePattern parse_pattern() {
        TriplePattern p;
        p.subject = parse_term();
        p.property = parse_term();
        p.value = parse_term();
        return p;
    }

    SparqlFilter parse_filter() {
        expect_punct("(");
        SparqlFilter f;
        check_supported(tok_);
        if (tok_.kind == Token::Kind::Word && upper(tok_.text) == "CONTAINS") {
            advance();
            expect_punct("(");
            expect_keyword("LCASE");
            expect_punct("(");
            if (tok_.kind != Token::Kind::Variable)
                throw SparqlError(SparqlErrorKind::Malformed, tok_.text,
                                  "CONTAINS(LCASE(…)) needs a variable");
            f.variable = tok_.text;
            advance();
            expect_punct(")");
            expect_punct(",");
            if (tok_.kind != Token::Kind::Literal)
                throw SparqlError(SparqlErrorKind::Malformed, tok_.text,
                                  "CONTAINS needs a string literal");
            f.literal = tok_.text;
            f.op = SparqlFilter::Op::ContainsCI;
            advance();
            expect_punct(")");
        } else if (tok_.kind == Token::Kind::Variable) {
            f.variable = tok_.text;
            advance();
            if (!is_punct("="))
                throw SparqlError(SparqlErrorKind::Unsupported, tok_.text,
                                  "only '=' comparisons are in the subset");
            advance();
            if (tok_.kind != Token::Kind::Literal && tok_.kind != Token::Kind::Number)
                throw SparqlError(SparqlErrorKind::Malformed, tok_.text,
                                  "FILTER '=' needs a literal");
            f.literal = tok_.text;
            f.op = SparqlFilter::Op::Equals;
            advance();
        } else {
            throw SparqlError(SparqlErrorKind::Unsupported, tok_.text,
                              "unsupported FILTER form '" + tok_.text + "'");
        }
        expect_punct(")");
        return f;
    }

    void validate(const SparqlSubsetQuery& q) {
        if (q.patterns.empty())
            throw SparqlError(SparqlErrorKind::Malformed, "{",
                              "query needs at least one triple pattern");
        std::set<std::string> bound;
        for (const auto& p : q.patterns)
            for (const auto* t : {&p.subject, &p.property, &p.value})
                if (t->is_var()) bound.insert(t->text);
        for (const auto& v : q.select_vars)
            if (!bound.count(v))
                throw SparqlError(SparqlErrorKind::Malformed, v,
                                  "selected variable ?" + v + " never appears in a pattern");
        for (const auto& f : q.filters)
            if (!bound.count(f.variable))
                throw SparqlError(SparqlErrorKind::Malformed, f.variable,
                                  "filtered variable ?" + f.variable +
                                      " never appears in a pattern");
    }

    Lexer lexer_;
    Token tok_;
};

std::string escape_literal(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::string term_to_string(const SparqlTerm& t) {
    switch (t.kind) {
        case SparqlTerm::Kind::Variable: return "?" + t.text;
        case SparqlTerm::Kind::Iri: return "<" + t.text + ">";
        case SparqlTerm::Kind::Literal: return "\"" + escape_literal(t.text) + "\"";
    }
    return t.text;
}

// Numeric-aware equality: numbers compare as numbers so "1911" matches
// "1911.0" on number-kind values, everything else compares exactly.
bool values_equal(const std::string& a, const std::string& b) {
    if (a == b) return true;
    auto as_number = [](const std::string& s, double& out) {
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        return ec == std::errc{} && p == s.data() + s.size();
    };
    double da = 0, db = 0;
    return as_number(a, da) && as_number(b, db) && da == db;
}

using Binding = std::map<std::string, std::string>;

bool match_position(const SparqlTerm& term, const std::string& fact_value, Binding& binding) {
    if (term.is_var()) {
        auto it = binding.find(term.text);
        if (it == binding.end()) {
            binding[term.text] = fact_value;
            return true;
        }
        return it->second == fact_value;
    }
    return values_equal(term.text, fact_value);
}

}  // namespace

SparqlSubsetQuery parse_sparql(const std::string& text) {
    return Parser(strip_code_fences(text)).parse();
}

std::string print_sparql(const SparqlSubsetQuery& q) {
    std::string out = "SELECT";
    for (const auto& v : q.select_vars) out += " ?" + v;
    out += " WHERE {";
    for (size_t i = 0; i < q.patterns.size(); ++i) {
        const auto& p = q.patterns[i];
        out += " " + term_to_string(p.subject) + " " + term_to_string(p.property) + " " +
               term_to_string(p.value);
        if (i + 1 < q.patterns.size()) out += " .";
    }
    for (const auto& f : q.filters) {
        if (f.op == SparqlFilter::Op::Equals)
            out += " FILTER(?" + f.variable + " = \"" + escape_literal(f.literal) + "\")";
        else
            out += " FILTER(CONTAINS(LCASE(?" + f.variable + "), \"" +
                   escape_literal(f.literal) + "\"))";
    }
    out += " }";
    if (q.limit) out += " LIMIT " + std::to_string(*q.limit);
    return out;
}

BindingTable execute(const SparqlSubsetQuery& q,
                     const std::vector<OntologyInstance>& instances) {
    std::vector<Binding> bindings{Binding{}};
    for (const auto& pattern : q.patterns) {
        std::vector<Binding> next;
        for (const auto& binding : bindings) {
            for (const auto& fact : instances) {
                Binding extended = binding;
                if (match_position(pattern.subject, fact.subject, extended) &&
                    match_position(pattern.property, fact.property, extended) &&
                    match_position(pattern.value, fact.value, extended))
                    next.push_back(std::move(extended));
            }
        }
        bindings = std::move(next);
        if (bindings.empty()) break;
    }

    auto lower = [](std::string s) {
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return char(std::tolower(c)); });
        return s;
    };
    std::vector<Binding> kept;
    for (auto& b : bindings) {
        bool ok = true;
        for (const auto& f : q.filters) {
            const std::string& bound = b.at(f.variable);
            if (f.op == SparqlFilter::Op::Equals)
                ok = values_equal(bound, f.literal);
            else
                ok = lower(bound).find(lower(f.literal)) != std::string::npos;
            if (!ok) break;
        }
        if (ok) kept.push_back(std::move(b));
    }

    BindingTable table;
    table.columns = q.select_vars;
    std::set<std::vector<std::string>> dedup;
    for (const auto& b : kept) {
        std::vector<std::string> row;
        row.reserve(q.select_vars.size());
        for (const auto& v : q.select_vars) row.push_back(b.at(v));
        dedup.insert(std::move(row));
    }
    table.rows.assign(dedup.begin(), dedup.end());  // set iteration = sorted
    if (q.limit && int64_t(table.rows.size()) > *q.limit) table.rows.resize(size_t(*q.limit));
    return table;
}

std::string generate_sparql(const std::string& question, const OntologySchema& schema,
                            ChatBackend& backend, const TemplateSet& templates,
                            const std::string& domain, const CompletionParams& params,
                            const RetryPolicy& retry) {
    if (trim(question).empty()) throw UsageError("generate_sparql: question is empty");
    auto report = validate_schema(schema);
    if (!report.ok())
        throw UsageError("generate_sparql: schema invalid: " + report.violations[0].path +
                         ": " + report.violations[0].message);

    std::vector<std::string> classes = schema.classes;
    std::vector<std::string> ops, dps;
    for (const auto& op : schema.object_properties)
        ops.push_back(op.name + " (" + op.domain + " -> " + op.range + ")");
    for (const auto& dp : schema.data_properties)
        dps.push_back(dp.name + " (" + dp.domain + ", " + value_kind_name(dp.kind) + ")");

    CompletionParams p = params;
    p.tag = "query_onto";
    std::string prompt = render(templates.get("query_onto"),
                                {{"Q", question},
                                 {"domain", domain},
                                 {"base", schema.namespace_iri},
                                 {"classes", join(classes, ", ")},
                                 {"object_properties", join(ops, "; ")},
                                 {"data_properties", join(dps, "; ")}});
    Completion completion = complete(backend, prompt, p, retry);
    return strip_code_fences(completion.text);
}

}  // namespace polyrag
