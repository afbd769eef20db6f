#pragma once
// Shared test scaffolding: fixture paths, temp dirs, and small builders.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "polyrag/config.hpp"
#include "polyrag/layer_construction.hpp"
#include "polyrag/llm.hpp"
#include "polyrag/pyramid.hpp"

namespace testutil {

inline std::string fixture_path(const std::string& rel) {
    return std::string(POLYRAG_FIXTURE_DIR) + "/" + rel;
}

// Unique temp directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("polyrag_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::filesystem::path path() const { return path_; }
    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline polyrag::OntologySchema tiny_schema() {
    polyrag::OntologySchema s;
    s.namespace_iri = "http://example.test/ns#";
    s.classes = {"Staff", "Department", "University"};
    s.object_properties = {{"works_in", "Staff", "Department"},
                           {"graduated_from", "Staff", "University"}};
    s.data_properties = {{"office", "Staff", polyrag::ValueKind::Text}};
    return s;
}

// LlmContext bound to a backend and the built-in templates. The template set
// outlives the context via a static.
inline polyrag::LlmContext make_llm(polyrag::ChatBackend& backend,
                                    const std::string& domain = "test") {
    static const polyrag::TemplateSet templates = polyrag::TemplateSet::builtin();
    polyrag::LlmContext llm;
    llm.backend = &backend;
    llm.templates = &templates;
    llm.domain = domain;
    llm.retry = {2, 0};
    return llm;
}

// Loads the bundled toy fixture pieces and runs pipeline stages on demand.
struct ToyFixture {
    polyrag::PipelineConfig config;
    std::shared_ptr<polyrag::ChatBackend> backend;
    std::shared_ptr<polyrag::EmbeddingProvider> embedder;
    polyrag::TemplateSet templates;
    polyrag::LlmContext llm;

    ToyFixture()
        : config(polyrag::PipelineConfig::load(fixture_path("toy/config.toml"))),
          backend(polyrag::make_chat_backend(config)),
          embedder(polyrag::make_embedder(config)),
          templates(polyrag::TemplateSet::builtin()) {
        llm.backend = backend.get();
        llm.templates = &templates;
        llm.domain = config.domain;
        llm.retry = config.retry_policy();
    }

    std::string corpus() const { return fixture_path("toy/corpus.jsonl"); }
    std::string schema() const { return fixture_path("toy/schema.json"); }
    std::string qa() const { return fixture_path("toy/qa.jsonl"); }
};

}  // namespace testutil

#include "polyrag/layer_interaction.hpp"
#include "polyrag/schema_io.hpp"

namespace testutil {

// Full offline pipeline over the toy fixture: build, complete, condense.
inline polyrag::KnowledgePyramid build_full_toy(const ToyFixture& toy) {
    polyrag::KnowledgePyramid p;
    p.schema = polyrag::load_schema(toy.schema());
    for (auto& c : polyrag::load_corpus(toy.corpus())) p.add_chunk(std::move(c));
    polyrag::BuildReport report;
    for (auto& i : polyrag::extract_instances(p.schema, p.chunks(), toy.llm, report))
        p.add_instance(std::move(i));
    for (auto& t : polyrag::extract_kg(p.chunks(), toy.llm, report))
        p.add_triplet(std::move(t));

    polyrag::CompletionConfig cc = toy.config.completion_config();
    cc.auto_accept = true;
    polyrag::run_completion(p, cc, toy.llm, *toy.embedder);
    polyrag::condense(p, toy.config.k_neighbors, toy.llm, *toy.embedder);
    return p;
}

}  // namespace testutil
