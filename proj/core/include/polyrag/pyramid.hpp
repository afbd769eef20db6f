#pragma once
// Domain model of the knowledge pyramid: an ontology (schema + instances),
// a knowledge-graph triplet layer, and chunk-based raw text, plus build
// metadata. Pyramids are value types; builders mutate a private copy and
// publish immutable snapshots.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "polyrag/error.hpp"

namespace polyrag {

struct TextChunk {
    std::string id;      // unique within a corpus; "{doc_id}#{seq}" when not given
    std::string doc_id;
    int64_t seq = 0;     // ordinal position within the document
    std::string text;

    bool operator==(const TextChunk&) const = default;
};

enum class ValueKind { Text, Number, Date };

const char* value_kind_name(ValueKind k);
std::optional<ValueKind> value_kind_from_name(const std::string& name);

struct ObjectProperty {
    std::string name;
    std::string domain;  // class name
    std::string range;   // class name

    bool operator==(const ObjectProperty&) const = default;
};

struct DataProperty {
    std::string name;
    std::string domain;
    ValueKind kind = ValueKind::Text;

    bool operator==(const DataProperty&) const = default;
};

struct OntologySchema {
    std::string namespace_iri;
    std::vector<std::string> classes;
    std::vector<ObjectProperty> object_properties;
    std::vector<DataProperty> data_properties;

    bool has_class(const std::string& name) const;
    // Declared (class, property) pairs in declaration order: object properties
    // first, then data properties. This order drives extraction and anchors.
    std::vector<std::pair<std::string, std::string>> pairs() const;
    bool has_pair(const std::string& cls, const std::string& property) const;
    // Kind of the value a (class, property) pair stores; object properties
    // hold entity references and report ValueKind::Text.
    std::optional<ValueKind> pair_value_kind(const std::string& cls,
                                             const std::string& property) const;

    bool operator==(const OntologySchema&) const = default;
};

struct SchemaViolation {
    std::string path;     // e.g. "object_properties/works_in"
    std::string message;

    bool operator==(const SchemaViolation&) const = default;
};

struct ValidationReport {
    std::vector<SchemaViolation> violations;
    bool ok() const { return violations.empty(); }
};

// Every invariant violation in the schema, with a path to the offender.
ValidationReport validate_schema(const OntologySchema& schema);

struct OntologyInstance {
    std::string subject;
    std::string subject_class;
    std::string property;
    std::string value;
    ValueKind value_kind = ValueKind::Text;  // declared kind tag of the stored value
    std::string source_chunk;

    bool same_fact(const OntologyInstance& other) const {
        return subject == other.subject && subject_class == other.subject_class &&
               property == other.property && value == other.value;
    }
    bool operator==(const OntologyInstance&) const = default;
};

struct KgTriplet {
    std::string id;
    std::string head;
    std::string relation;
    std::string tail;
    std::string source_chunk;
    std::vector<std::string> condensed_from;  // ids of triplets this one replaced

    bool same_fact(const KgTriplet& other) const {
        return head == other.head && relation == other.relation && tail == other.tail;
    }
    bool operator==(const KgTriplet&) const = default;
};

struct BuildMeta {
    std::string chat_provider;
    std::string embedding_provider;
    int embedding_dim = 0;
    std::map<std::string, std::string> config_snapshot;
    std::vector<std::pair<std::string, std::string>> stage_timestamps;  // (stage, iso time)

    bool operator==(const BuildMeta&) const = default;
};

class KnowledgePyramid {
public:
    OntologySchema schema;
    BuildMeta build_meta;

    const std::vector<TextChunk>& chunks() const { return chunks_; }
    const std::vector<OntologyInstance>& instances() const { return instances_; }
    const std::vector<KgTriplet>& kg() const { return kg_; }

    const TextChunk* chunk_by_id(const std::string& id) const;
    const KgTriplet* triplet_by_id(const std::string& id) const;

    // Mutation API. Inserts that would violate an invariant are rejected
    // with UsageError; duplicates are ignored and reported via the return.
    void add_chunk(TextChunk chunk);
    // Returns false when the same fact is already present (first-seen
    // provenance wins, per the dedup contract).
    bool add_instance(OntologyInstance instance);
    // Assigns a fresh id when the triplet has none; returns the stored id,
    // or nullopt when an identical (head, relation, tail) already exists.
    std::optional<std::string> add_triplet(KgTriplet triplet);
    // Deleting a chunk referenced by any triplet or instance is rejected.
    void remove_chunk(const std::string& id);
    void remove_triplet(const std::string& id);

    bool operator==(const KnowledgePyramid&) const = default;

private:
    friend KnowledgePyramid load_pyramid(const std::string& dir);

    std::string fresh_triplet_id();

    std::vector<TextChunk> chunks_;
    std::vector<OntologyInstance> instances_;
    std::vector<KgTriplet> kg_;
    uint64_t next_triplet_serial_ = 1;
};

// Reads a JSONL corpus: fields `doc_id`, `seq`, `text`, optional `id`.
// Streams line by line; malformed lines raise errors naming the line number.
std::vector<TextChunk> load_corpus(const std::string& path);

struct Manifest {
    std::map<std::string, int64_t> counts;        // layer -> record count
    std::map<std::string, std::string> digests;   // file -> sha256 hex
};

// Writes schema.json, instances.jsonl, kg.jsonl, chunks.jsonl and a
// manifest.json carrying counts, digests and build metadata.
Manifest save_pyramid(const KnowledgePyramid& pyramid, const std::string& dir);
// Verifies digests before accepting any layer; IntegrityError on mismatch
// or on a missing layer file (the error names the layer).
KnowledgePyramid load_pyramid(const std::string& dir);

}  // namespace polyrag
