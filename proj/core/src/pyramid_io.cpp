#include <filesystem>
#include <set>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "detail/sha256.hpp"
#include "polyrag/pyramid.hpp"
#include "polyrag/schema_io.hpp"

namespace polyrag {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSchemaFile = "schema.json";
constexpr const char* kInstancesFile = "instances.jsonl";
constexpr const char* kKgFile = "kg.jsonl";
constexpr const char* kChunksFile = "chunks.jsonl";
constexpr const char* kManifestFile = "manifest.json";

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + path.string() + "'");
    out << content;
}

std::string read_file(const fs::path& path, const std::string& layer) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IntegrityError("missing layer file '" + layer + "' in " +
                                  path.parent_path().string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json schema_to_json(const OntologySchema& s) {
    json obj;
    obj["namespace"] = s.namespace_iri;
    obj["classes"] = s.classes;
    obj["object_properties"] = json::array();
    for (const auto& op : s.object_properties)
        obj["object_properties"].push_back(
            {{"name", op.name}, {"domain", op.domain}, {"range", op.range}});
    obj["data_properties"] = json::array();
    for (const auto& dp : s.data_properties)
        obj["data_properties"].push_back(
            {{"name", dp.name}, {"domain", dp.domain}, {"kind", value_kind_name(dp.kind)}});
    return obj;
}

OntologySchema schema_from_json(const json& obj) {
    OntologySchema s;
    s.namespace_iri = obj.at("namespace").get<std::string>();
    s.classes = obj.at("classes").get<std::vector<std::string>>();
    for (const auto& op : obj.at("object_properties"))
        s.object_properties.push_back({op.at("name").get<std::string>(),
                                       op.at("domain").get<std::string>(),
                                       op.at("range").get<std::string>()});
    for (const auto& dp : obj.at("data_properties")) {
        auto kind = value_kind_from_name(dp.at("kind").get<std::string>());
        if (!kind) throw IntegrityError("schema: unknown value kind '" +
                                        dp.at("kind").get<std::string>() + "'");
        s.data_properties.push_back(
            {dp.at("name").get<std::string>(), dp.at("domain").get<std::string>(), *kind});
    }
    return s;
}

json meta_to_json(const BuildMeta& m) {
    json obj;
    obj["chat_provider"] = m.chat_provider;
    obj["embedding_provider"] = m.embedding_provider;
    obj["embedding_dim"] = m.embedding_dim;
    obj["config_snapshot"] = m.config_snapshot;
    obj["stage_timestamps"] = json::array();
    for (const auto& [stage, when] : m.stage_timestamps)
        obj["stage_timestamps"].push_back({{"stage", stage}, {"at", when}});
    return obj;
}

BuildMeta meta_from_json(const json& obj) {
    BuildMeta m;
    m.chat_provider = obj.at("chat_provider").get<std::string>();
    m.embedding_provider = obj.at("embedding_provider").get<std::string>();
    m.embedding_dim = obj.at("embedding_dim").get<int>();
    m.config_snapshot = obj.at("config_snapshot").get<std::map<std::string, std::string>>();
    for (const auto& e : obj.at("stage_timestamps"))
        m.stage_timestamps.emplace_back(e.at("stage").get<std::string>(),
                                        e.at("at").get<std::string>());
    return m;
}

}  // namespace

OntologySchema load_schema(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("schema file '" + path + "' not readable");
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw IntegrityError("schema file '" + path + "' is not valid JSON");
    try {
        return schema_from_json(doc);
    } catch (const json::exception& e) {
        throw IntegrityError("schema file '" + path + "': " + e.what());
    }
}

std::string schema_to_json_string(const OntologySchema& schema) {
    return schema_to_json(schema).dump(2) + "\n";
}

Manifest save_pyramid(const KnowledgePyramid& pyramid, const std::string& dir) {
    fs::create_directories(dir);
    const fs::path base(dir);

    std::string schema_doc = schema_to_json(pyramid.schema).dump(2) + "\n";

    std::ostringstream chunks;
    for (const auto& c : pyramid.chunks()) {
        json rec{{"id", c.id}, {"doc_id", c.doc_id}, {"seq", c.seq}, {"text", c.text}};
        chunks << rec.dump() << "\n";
    }
    std::ostringstream instances;
    for (const auto& i : pyramid.instances()) {
        json rec{{"subject", i.subject},     {"class", i.subject_class},
                 {"property", i.property},   {"value", i.value},
                 {"kind", value_kind_name(i.value_kind)}, {"source_chunk", i.source_chunk}};
        instances << rec.dump() << "\n";
    }
    std::ostringstream kg;
    for (const auto& t : pyramid.kg()) {
        json rec{{"id", t.id},     {"head", t.head},
                 {"relation", t.relation}, {"tail", t.tail},
                 {"source_chunk", t.source_chunk}};
        if (!t.condensed_from.empty()) rec["condensed_from"] = t.condensed_from;
        kg << rec.dump() << "\n";
    }

    write_file(base / kSchemaFile, schema_doc);
    write_file(base / kChunksFile, chunks.str());
    write_file(base / kInstancesFile, instances.str());
    write_file(base / kKgFile, kg.str());

    Manifest manifest;
    manifest.counts["chunks"] = int64_t(pyramid.chunks().size());
    manifest.counts["instances"] = int64_t(pyramid.instances().size());
    manifest.counts["kg"] = int64_t(pyramid.kg().size());
    manifest.counts["classes"] = int64_t(pyramid.schema.classes.size());
    manifest.digests[kSchemaFile] = detail::sha256_hex(schema_doc);
    manifest.digests[kChunksFile] = detail::sha256_hex(chunks.str());
    manifest.digests[kInstancesFile] = detail::sha256_hex(instances.str());
    manifest.digests[kKgFile] = detail::sha256_hex(kg.str());

    json mj;
    mj["format_version"] = 1;
    mj["counts"] = manifest.counts;
    mj["digests"] = manifest.digests;
    mj["build_meta"] = meta_to_json(pyramid.build_meta);
    write_file(base / kManifestFile, mj.dump(2) + "\n");
    return manifest;
}

KnowledgePyramid load_pyramid(const std::string& dir) {
    const fs::path base(dir);
    std::string manifest_doc = read_file(base / kManifestFile, "manifest");
    json mj = json::parse(manifest_doc, nullptr, false);
    if (mj.is_discarded()) throw IntegrityError("manifest.json is not valid JSON");

    auto digests = mj.at("digests").get<std::map<std::string, std::string>>();
    auto check = [&](const char* file, const std::string& layer) {
        std::string content = read_file(base / file, layer);
        auto it = digests.find(file);
        if (it == digests.end())
            throw IntegrityError("manifest has no digest for layer '" + layer + "'");
        if (detail::sha256_hex(content) != it->second)
            throw IntegrityError("digest mismatch for layer '" + layer + "' (" + file + ")");
        return content;
    };

    std::string schema_doc = check(kSchemaFile, "schema");
    std::string chunks_doc = check(kChunksFile, "chunks");
    std::string instances_doc = check(kInstancesFile, "instances");
    std::string kg_doc = check(kKgFile, "kg");

    KnowledgePyramid p;
    p.schema = schema_from_json(json::parse(schema_doc));
    p.build_meta = meta_from_json(mj.at("build_meta"));

    auto each_line = [](const std::string& doc, auto&& fn) {
        std::istringstream in(doc);
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json rec = json::parse(line, nullptr, false);
            if (rec.is_discarded())
                throw IntegrityError("layer record at line " + std::to_string(line_no) +
                                     " is not valid JSON");
            fn(rec);
        }
    };

    each_line(chunks_doc, [&](const json& rec) {
        TextChunk c{rec.at("id").get<std::string>(), rec.at("doc_id").get<std::string>(),
                    rec.at("seq").get<int64_t>(), rec.at("text").get<std::string>()};
        p.chunks_.push_back(std::move(c));
    });
    each_line(instances_doc, [&](const json& rec) {
        OntologyInstance i;
        i.subject = rec.at("subject").get<std::string>();
        i.subject_class = rec.at("class").get<std::string>();
        i.property = rec.at("property").get<std::string>();
        i.value = rec.at("value").get<std::string>();
        auto kind = value_kind_from_name(rec.at("kind").get<std::string>());
        if (!kind) throw IntegrityError("instance with unknown value kind");
        i.value_kind = *kind;
        i.source_chunk = rec.at("source_chunk").get<std::string>();
        p.instances_.push_back(std::move(i));
    });
    uint64_t max_serial = 0;
    each_line(kg_doc, [&](const json& rec) {
        KgTriplet t;
        t.id = rec.at("id").get<std::string>();
        t.head = rec.at("head").get<std::string>();
        t.relation = rec.at("relation").get<std::string>();
        t.tail = rec.at("tail").get<std::string>();
        t.source_chunk = rec.at("source_chunk").get<std::string>();
        if (rec.contains("condensed_from"))
            t.condensed_from = rec.at("condensed_from").get<std::vector<std::string>>();
        if (t.id.size() > 1 && t.id[0] == 't') {
            uint64_t serial = std::strtoull(t.id.c_str() + 1, nullptr, 10);
            max_serial = std::max(max_serial, serial);
        }
        p.kg_.push_back(std::move(t));
    });
    p.next_triplet_serial_ = max_serial + 1;

    // Layer invariants hold for loaded pyramids too, not only for inserts.
    std::set<std::string> chunk_ids;
    std::set<std::pair<std::string, int64_t>> doc_seqs;
    for (const auto& c : p.chunks()) {
        if (!chunk_ids.insert(c.id).second)
            throw IntegrityError("duplicate chunk id '" + c.id + "' in chunks layer");
        if (!doc_seqs.insert({c.doc_id, c.seq}).second)
            throw IntegrityError("duplicate (doc_id, seq) in chunks layer: (" + c.doc_id +
                                 ", " + std::to_string(c.seq) + ")");
    }
    for (const auto& t : p.kg()) {
        if (!t.source_chunk.empty() && !chunk_ids.count(t.source_chunk))
            throw IntegrityError("triplet '" + t.id + "' references unknown chunk '" +
                                 t.source_chunk + "'");
        for (const auto* field : {&t.head, &t.relation, &t.tail})
            if (field->empty() || field->find(',') != std::string::npos)
                throw IntegrityError("triplet '" + t.id +
                                     "' has an empty or comma-bearing field");
    }
    for (const auto& i : p.instances()) {
        if (!i.source_chunk.empty() && !chunk_ids.count(i.source_chunk))
            throw IntegrityError("instance of '" + i.subject + "' references unknown chunk '" +
                                 i.source_chunk + "'");
        if (!p.schema.has_pair(i.subject_class, i.property))
            throw IntegrityError("instance of '" + i.subject + "' uses pair (" +
                                 i.subject_class + ", " + i.property +
                                 ") missing from the schema");
    }
    return p;
}

}  // namespace polyrag
