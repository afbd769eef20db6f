#include "polyrag/pyramid.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <unordered_set>

#include <json.hpp>

namespace polyrag {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

const char* value_kind_name(ValueKind k) {
    switch (k) {
        case ValueKind::Text: return "text";
        case ValueKind::Number: return "number";
        case ValueKind::Date: return "date";
    }
    return "text";
}

std::optional<ValueKind> value_kind_from_name(const std::string& name) {
    if (name == "text") return ValueKind::Text;
    if (name == "number") return ValueKind::Number;
    if (name == "date") return ValueKind::Date;
    return std::nullopt;
}

bool OntologySchema::has_class(const std::string& name) const {
    return std::find(classes.begin(), classes.end(), name) != classes.end();
}

std::vector<std::pair<std::string, std::string>> OntologySchema::pairs() const {
    std::vector<std::pair<std::string, std::string>> out;
    out.reserve(object_properties.size() + data_properties.size());
    for (const auto& op : object_properties) out.emplace_back(op.domain, op.name);
    for (const auto& dp : data_properties) out.emplace_back(dp.domain, dp.name);
    return out;
}

bool OntologySchema::has_pair(const std::string& cls, const std::string& property) const {
    return pair_value_kind(cls, property).has_value();
}

std::optional<ValueKind> OntologySchema::pair_value_kind(const std::string& cls,
                                                         const std::string& property) const {
    for (const auto& op : object_properties)
        if (op.domain == cls && op.name == property) return ValueKind::Text;
    for (const auto& dp : data_properties)
        if (dp.domain == cls && dp.name == property) return dp.kind;
    return std::nullopt;
}

ValidationReport validate_schema(const OntologySchema& schema) {
    ValidationReport report;
    auto add = [&](std::string path, std::string msg) {
        report.violations.push_back({std::move(path), std::move(msg)});
    };

    std::set<std::string> seen_classes;
    for (const auto& c : schema.classes) {
        if (!seen_classes.insert(c).second)
            add("classes/" + c, "class name declared more than once");
    }

    std::set<std::pair<std::string, std::string>> seen_pairs;
    for (const auto& op : schema.object_properties) {
        std::string path = "object_properties/" + op.name;
        if (!schema.has_class(op.domain))
            add(path, "domain class '" + op.domain + "' not in classes");
        if (!schema.has_class(op.range))
            add(path, "range class '" + op.range + "' not in classes");
        if (!seen_pairs.insert({op.domain, op.name}).second)
            add(path, "property name '" + op.name + "' duplicated on class '" + op.domain + "'");
    }
    for (const auto& dp : schema.data_properties) {
        std::string path = "data_properties/" + dp.name;
        if (!schema.has_class(dp.domain))
            add(path, "domain class '" + dp.domain + "' not in classes");
        if (!seen_pairs.insert({dp.domain, dp.name}).second)
            add(path, "property name '" + dp.name + "' duplicated on class '" + dp.domain + "'");
    }
    return report;
}

const TextChunk* KnowledgePyramid::chunk_by_id(const std::string& id) const {
    for (const auto& c : chunks_)
        if (c.id == id) return &c;
    return nullptr;
}

const KgTriplet* KnowledgePyramid::triplet_by_id(const std::string& id) const {
    for (const auto& t : kg_)
        if (t.id == id) return &t;
    return nullptr;
}

void KnowledgePyramid::add_chunk(TextChunk chunk) {
    if (trim(chunk.text).empty())
        throw UsageError("chunk '" + chunk.id + "': text empty after whitespace trim");
    for (const auto& c : chunks_) {
        if (c.id == chunk.id)
            throw UsageError("duplicate chunk id '" + chunk.id + "'");
        if (c.doc_id == chunk.doc_id && c.seq == chunk.seq)
            throw UsageError("duplicate (doc_id, seq) = (" + chunk.doc_id + ", " +
                             std::to_string(chunk.seq) + ")");
    }
    chunks_.push_back(std::move(chunk));
}

bool KnowledgePyramid::add_instance(OntologyInstance instance) {
    auto kind = schema.pair_value_kind(instance.subject_class, instance.property);
    if (!kind)
        throw UsageError("instance (" + instance.subject + ", " + instance.property +
                         "): pair (" + instance.subject_class + ", " + instance.property +
                         ") not in schema");
    if (*kind == ValueKind::Number) {
        double parsed = 0;
        auto [p, ec] = std::from_chars(instance.value.data(),
                                       instance.value.data() + instance.value.size(), parsed);
        if (ec != std::errc{} || p != instance.value.data() + instance.value.size())
            throw UsageError("instance (" + instance.subject + ", " + instance.property +
                             "): value '" + instance.value + "' is not a number");
    }
    instance.value_kind = *kind;
    if (!instance.source_chunk.empty() && !chunk_by_id(instance.source_chunk))
        throw UsageError("instance source_chunk '" + instance.source_chunk + "' unknown");
    for (const auto& existing : instances_)
        if (existing.same_fact(instance)) return false;  // first-seen provenance wins
    instances_.push_back(std::move(instance));
    return true;
}

std::string KnowledgePyramid::fresh_triplet_id() {
    return "t" + std::to_string(next_triplet_serial_++);
}

std::optional<std::string> KnowledgePyramid::add_triplet(KgTriplet triplet) {
    auto bad_field = [](const std::string& f) {
        return trim(f).empty() || f.find(',') != std::string::npos;
    };
    if (bad_field(triplet.head) || bad_field(triplet.relation) || bad_field(triplet.tail))
        throw UsageError("triplet (" + triplet.head + ", " + triplet.relation + ", " +
                         triplet.tail + "): fields must be non-empty and comma-free");
    if (!triplet.source_chunk.empty() && !chunk_by_id(triplet.source_chunk))
        throw UsageError("triplet source_chunk '" + triplet.source_chunk + "' unknown");
    for (const auto& existing : kg_)
        if (existing.same_fact(triplet)) return std::nullopt;
    if (triplet.id.empty()) triplet.id = fresh_triplet_id();
    std::string id = triplet.id;
    kg_.push_back(std::move(triplet));
    return id;
}

void KnowledgePyramid::remove_chunk(const std::string& id) {
    for (const auto& t : kg_)
        if (t.source_chunk == id)
            throw UsageError("chunk '" + id + "' is referenced by triplet '" + t.id + "'");
    for (const auto& i : instances_)
        if (i.source_chunk == id)
            throw UsageError("chunk '" + id + "' is referenced by an instance of '" +
                             i.subject + "'");
    auto it = std::find_if(chunks_.begin(), chunks_.end(),
                           [&](const TextChunk& c) { return c.id == id; });
    if (it == chunks_.end()) throw UsageError("chunk '" + id + "' not found");
    chunks_.erase(it);
}

void KnowledgePyramid::remove_triplet(const std::string& id) {
    auto it = std::find_if(kg_.begin(), kg_.end(),
                           [&](const KgTriplet& t) { return t.id == id; });
    if (it == kg_.end()) throw UsageError("triplet '" + id + "' not found");
    kg_.erase(it);
}

std::vector<TextChunk> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("corpus file '" + path + "' not readable");

    std::vector<TextChunk> chunks;
    std::unordered_set<std::string> ids;
    std::set<std::pair<std::string, int64_t>> doc_seqs;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
        auto fail = [&](const std::string& why) -> UsageError {
            return UsageError("corpus line " + std::to_string(line_no) + ": " + why);
        };
        if (rec.is_discarded()) throw fail("not valid JSON");
        if (!rec.contains("doc_id") || !rec["doc_id"].is_string()) throw fail("missing doc_id");
        if (!rec.contains("seq") || !rec["seq"].is_number_integer()) throw fail("missing seq");
        if (!rec.contains("text") || !rec["text"].is_string()) throw fail("missing text");

        TextChunk chunk;
        chunk.doc_id = rec["doc_id"].get<std::string>();
        chunk.seq = rec["seq"].get<int64_t>();
        chunk.text = rec["text"].get<std::string>();
        if (chunk.seq < 0) throw fail("seq must be >= 0");
        if (trim(chunk.text).empty()) throw fail("text empty after whitespace trim");
        chunk.id = rec.contains("id") ? rec["id"].get<std::string>()
                                      : chunk.doc_id + "#" + std::to_string(chunk.seq);
        if (!ids.insert(chunk.id).second) throw fail("duplicate id '" + chunk.id + "'");
        if (!doc_seqs.insert({chunk.doc_id, chunk.seq}).second)
            throw fail("duplicate (doc_id, seq)");
        chunks.push_back(std::move(chunk));
    }
    return chunks;
}

}  // namespace polyrag
