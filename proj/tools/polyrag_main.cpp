// Command-line surface tying the pipeline together:
//   build, complete, condense, query, eval, serve, inspect.
// Exit codes: 0 ok, 2 usage, 3 config, 4 backend, 5 data-integrity.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "polyrag/config.hpp"
#include "polyrag/eval.hpp"
#include "polyrag/layer_construction.hpp"
#include "polyrag/layer_interaction.hpp"
#include "polyrag/pyramid.hpp"
#include "polyrag/query.hpp"
#include "polyrag/schema_io.hpp"
#include "polyrag/serve.hpp"

namespace fs = std::filesystem;
using namespace polyrag;

namespace {

int exit_code_for(ErrorClass cls) {
    switch (cls) {
        case ErrorClass::Usage: return 2;
        case ErrorClass::Config: return 3;
        case ErrorClass::Backend: return 4;
        case ErrorClass::Integrity: return 5;
        case ErrorClass::Internal: return 1;
    }
    return 1;
}

struct Session {
    PipelineConfig config;
    std::shared_ptr<ChatBackend> backend;
    std::shared_ptr<EmbeddingProvider> embedder;
    TemplateSet templates;
    LlmContext llm;

    explicit Session(const std::string& config_path)
        : config(PipelineConfig::load(config_path)),
          backend(make_chat_backend(config)),
          embedder(make_embedder(config)),
          templates(config.template_dir.empty()
                        ? TemplateSet::builtin()
                        : TemplateSet::with_overrides(config.template_dir)) {
        llm.backend = backend.get();
        llm.templates = &templates;
        llm.domain = config.domain;
        llm.examples = config.examples_block;
        llm.params.temperature = config.temperature;
        llm.retry = config.retry_policy();
    }
};

void write_text_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + path.string() + "'");
    out << content;
}

void stamp_stage(KnowledgePyramid& pyramid, StageClock& clock, const std::string& stage) {
    pyramid.build_meta.stage_timestamps.emplace_back(stage, clock.stamp());
}

int cmd_build(const std::string& corpus_path, const std::string& schema_path,
              const std::string& config_path, const std::string& out_dir, bool skip_kg) {
    Session session(config_path);
    StageClock clock = StageClock::for_config(session.config);

    if (!fs::exists(schema_path))
        throw UsageError("schema file '" + schema_path + "' does not exist");
    OntologySchema schema = load_schema(schema_path);
    auto validation = validate_schema(schema);
    if (!validation.ok())
        throw IntegrityError("schema invalid: " + validation.violations[0].path + ": " +
                             validation.violations[0].message);

    KnowledgePyramid pyramid;
    pyramid.schema = schema;
    pyramid.build_meta.chat_provider = session.backend->id();
    pyramid.build_meta.embedding_provider = session.embedder->id();
    pyramid.build_meta.embedding_dim = session.embedder->dim();
    pyramid.build_meta.config_snapshot = session.config.snapshot();
    stamp_stage(pyramid, clock, "build_start");

    for (auto& chunk : load_corpus(corpus_path)) pyramid.add_chunk(std::move(chunk));
    stamp_stage(pyramid, clock, "corpus_loaded");

    BuildReport report;
    for (auto& inst : extract_instances(schema, pyramid.chunks(), session.llm, report)) {
        try {
            pyramid.add_instance(std::move(inst));
        } catch (const UsageError& e) {
            report.rejected_lines.emplace_back("f_ins", e.what());
        }
    }
    stamp_stage(pyramid, clock, "instances_extracted");

    if (!skip_kg) {
        for (auto& triplet : extract_kg(pyramid.chunks(), session.llm, report)) {
            try {
                pyramid.add_triplet(std::move(triplet));
            } catch (const UsageError& e) {
                report.rejected_lines.emplace_back("kg", e.what());
            }
        }
        stamp_stage(pyramid, clock, "kg_extracted");
    }

    save_pyramid(pyramid, out_dir);
    write_text_file(fs::path(out_dir) / "reports" / "build_report.json",
                    report.to_json_string());
    std::cout << "built pyramid at " << out_dir << ": " << pyramid.chunks().size()
              << " chunks, " << pyramid.instances().size() << " instances, "
              << pyramid.kg().size() << " kg triplets\n";
    return 0;
}

int cmd_complete(const std::string& pyramid_dir, const std::string& config_path,
                 std::string out_dir, bool auto_accept) {
    Session session(config_path);
    if (auto_accept) session.config.auto_accept = true;
    if (out_dir.empty()) out_dir = pyramid_dir;
    StageClock clock = StageClock::for_config(session.config);

    KnowledgePyramid pyramid = load_pyramid(pyramid_dir);
    CompletionReport report = run_completion(pyramid, session.config.completion_config(),
                                             session.llm, *session.embedder);
    stamp_stage(pyramid, clock, "completion");
    save_pyramid(pyramid, out_dir);
    write_text_file(fs::path(out_dir) / "reports" / "completion.jsonl",
                    report.to_json_lines());
    write_text_file(fs::path(out_dir) / "reports" / "completion_scores.json",
                    report.score_map_json());

    size_t accepted = 0;
    size_t pending = 0;
    for (const auto& it : report.iterations) {
        accepted += it.accepted;
        for (const auto& p : it.proposals)
            if (p.status == SchemaProposal::Status::Pending) ++pending;
    }
    std::cout << "completion: " << report.iterations.size() << " iteration(s), " << accepted
              << " proposal(s) accepted";
    if (pending) std::cout << ", " << pending << " pending (rerun with --auto-accept to apply)";
    std::cout << "\n";
    return 0;
}

int cmd_condense(const std::string& pyramid_dir, const std::string& config_path,
                 std::string out_dir) {
    Session session(config_path);
    if (out_dir.empty()) out_dir = pyramid_dir;
    StageClock clock = StageClock::for_config(session.config);

    KnowledgePyramid pyramid = load_pyramid(pyramid_dir);
    size_t before = pyramid.kg().size();
    CondensationReport report =
        condense(pyramid, session.config.k_neighbors, session.llm, *session.embedder);
    stamp_stage(pyramid, clock, "condensation");
    save_pyramid(pyramid, out_dir);
    write_text_file(fs::path(out_dir) / "reports" / "condensation.jsonl",
                    report.to_json_lines());
    std::cout << "condensation: kg " << before << " -> " << pyramid.kg().size() << " triplets, "
              << report.records.size() << " anchor record(s)\n";
    return 0;
}

int cmd_query(const std::string& pyramid_dir, const std::string& config_path,
              const std::string& question, bool as_json) {
    Session session(config_path);
    KnowledgePyramid pyramid = load_pyramid(pyramid_dir);
    PyramidIndexes indexes(pyramid, *session.embedder);
    AnsweredQuery result = answer(question, indexes, session.llm, session.config.query);

    if (as_json) {
        std::cout << answered_query_to_json(result, true);
        return 0;
    }
    std::cout << "answer: " << result.answer << "\n";
    std::cout << "layer:  " << layer_name(result.resolved_layer) << "\n";
    switch (result.resolved_layer) {
        case Layer::Ontology:
            for (const auto& row : result.bindings.rows) {
                std::cout << "evidence:";
                for (const auto& v : row) std::cout << " " << v;
                std::cout << "\n";
            }
            break;
        case Layer::Kg:
            for (const auto& t : result.triplets)
                std::cout << "evidence: " << t.head << " " << t.relation << " " << t.tail
                          << "\n";
            break;
        case Layer::RawText:
            for (const auto& c : result.chunks)
                std::cout << "evidence: [" << c.id << "] " << c.text << "\n";
            break;
    }
    return 0;
}

int cmd_eval(const std::string& pyramid_dir, const std::string& config_path,
             const std::string& dataset_path, std::string out_path,
             const std::string& csv_path) {
    Session session(config_path);
    KnowledgePyramid pyramid = load_pyramid(pyramid_dir);
    PyramidIndexes indexes(pyramid, *session.embedder);

    auto dataset = load_dataset(dataset_path);
    EvalReport report = run_benchmark(dataset, indexes, session.llm, session.config.query,
                                      session.config.snapshot());
    if (out_path.empty())
        out_path = (fs::path(pyramid_dir) / "reports" / "eval_report.json").string();
    write_text_file(out_path, report.to_json_string());
    if (!csv_path.empty()) write_text_file(csv_path, report.to_csv_string());

    std::cout << "eval: " << report.answered << " answered, " << report.failed << " failed";
    for (const auto& [layer, share] : report.routing) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f%%", share * 100.0);
        std::cout << ", " << layer << " " << buf;
    }
    std::cout << "; report " << out_path << "\n";
    return 0;
}

int cmd_serve(const std::string& pyramid_dir, const std::string& config_path,
              const std::string& host, int port) {
    Session session(config_path);
    KnowledgePyramid pyramid = load_pyramid(pyramid_dir);
    PyramidIndexes indexes(pyramid, *session.embedder);
    AnswerServer server(indexes, session.llm, session.config.query);
    std::cout << "serving POST /answer on " << host << ":" << port << "\n" << std::flush;
    if (!server.listen(host, port))
        throw UsageError("cannot bind " + host + ":" + std::to_string(port));
    return 0;
}

int cmd_inspect(const std::string& pyramid_dir, bool as_json) {
    KnowledgePyramid pyramid = load_pyramid(pyramid_dir);
    nlohmann::json obj;
    obj["counts"] = {{"chunks", pyramid.chunks().size()},
                     {"instances", pyramid.instances().size()},
                     {"kg", pyramid.kg().size()},
                     {"classes", pyramid.schema.classes.size()}};
    obj["schema"] = {{"namespace", pyramid.schema.namespace_iri},
                     {"classes", pyramid.schema.classes}};
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [cls, property] : pyramid.schema.pairs())
        pairs.push_back(cls + "/" + property);
    obj["schema"]["pairs"] = pairs;
    obj["build_meta"] = {{"chat_provider", pyramid.build_meta.chat_provider},
                         {"embedding_provider", pyramid.build_meta.embedding_provider},
                         {"embedding_dim", pyramid.build_meta.embedding_dim}};

    fs::path report_path = fs::path(pyramid_dir) / "reports" / "eval_report.json";
    if (fs::exists(report_path)) {
        std::ifstream in(report_path);
        nlohmann::json report = nlohmann::json::parse(in, nullptr, false);
        if (!report.is_discarded() && report.contains("routing"))
            obj["last_eval_routing"] = report["routing"];
    }

    if (as_json) {
        std::cout << obj.dump(2) << "\n";
        return 0;
    }
    std::cout << "pyramid at " << pyramid_dir << "\n"
              << "  chunks:    " << pyramid.chunks().size() << "\n"
              << "  instances: " << pyramid.instances().size() << "\n"
              << "  kg:        " << pyramid.kg().size() << "\n"
              << "  classes:   " << pyramid.schema.classes.size() << " (namespace "
              << pyramid.schema.namespace_iri << ")\n";
    if (obj.contains("last_eval_routing")) {
        std::cout << "  routing (last eval):";
        for (const auto& [layer, share] : obj["last_eval_routing"].items()) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), " %s=%.1f%%", layer.c_str(),
                          share.get<double>() * 100.0);
            std::cout << buf;
        }
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge-pyramid retrieval pipeline"};
    app.require_subcommand(1);

    std::string config_path, corpus, schema, pyramid_dir, out_dir, question, dataset, csv_path,
        host = "0.0.0.0";
    bool skip_kg = false, auto_accept = false, as_json = false;
    int port = 8080;

    auto* build = app.add_subcommand("build", "construct the initial pyramid layers");
    build->add_option("--corpus", corpus, "corpus JSONL file")->required();
    build->add_option("--schema", schema, "ontology schema JSON file")->required();
    build->add_option("--out", out_dir, "output pyramid directory")->required();
    build->add_option("--config", config_path, "pipeline config file");
    build->add_flag("--skip-kg", skip_kg, "build ontology and text layers only");

    auto* complete_cmd = app.add_subcommand("complete", "run knowledge completion");
    complete_cmd->add_option("--pyramid", pyramid_dir, "pyramid directory")->required();
    complete_cmd->add_option("--config", config_path, "pipeline config file");
    complete_cmd->add_option("--out", out_dir, "output directory (default: in place)");
    complete_cmd->add_flag("--auto-accept", auto_accept, "apply proposals without review");

    auto* condense_cmd = app.add_subcommand("condense", "run knowledge condensation");
    condense_cmd->add_option("--pyramid", pyramid_dir, "pyramid directory")->required();
    condense_cmd->add_option("--config", config_path, "pipeline config file");
    condense_cmd->add_option("--out", out_dir, "output directory (default: in place)");

    auto* query_cmd = app.add_subcommand("query", "answer one question");
    query_cmd->add_option("--pyramid", pyramid_dir, "pyramid directory")->required();
    query_cmd->add_option("--question", question, "question text")->required();
    query_cmd->add_option("--config", config_path, "pipeline config file");
    query_cmd->add_flag("--json", as_json, "emit JSON");

    auto* eval_cmd = app.add_subcommand("eval", "run a QA benchmark");
    eval_cmd->add_option("--pyramid", pyramid_dir, "pyramid directory")->required();
    eval_cmd->add_option("--dataset", dataset, "QA dataset JSONL")->required();
    eval_cmd->add_option("--config", config_path, "pipeline config file");
    eval_cmd->add_option("--out", out_dir, "report output path");
    eval_cmd->add_option("--csv", csv_path, "also write a flat per-item CSV");

    auto* serve_cmd = app.add_subcommand("serve", "expose POST /answer over HTTP");
    serve_cmd->add_option("--pyramid", pyramid_dir, "pyramid directory")->required();
    serve_cmd->add_option("--config", config_path, "pipeline config file");
    serve_cmd->add_option("--host", host, "bind host");
    serve_cmd->add_option("--port", port, "bind port");

    auto* inspect_cmd = app.add_subcommand("inspect", "print layer counts and stats");
    inspect_cmd->add_option("--pyramid", pyramid_dir, "pyramid directory")->required();
    inspect_cmd->add_flag("--json", as_json, "emit JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (build->parsed()) return cmd_build(corpus, schema, config_path, out_dir, skip_kg);
        if (complete_cmd->parsed())
            return cmd_complete(pyramid_dir, config_path, out_dir, auto_accept);
        if (condense_cmd->parsed()) return cmd_condense(pyramid_dir, config_path, out_dir);
        if (query_cmd->parsed()) return cmd_query(pyramid_dir, config_path, question, as_json);
        if (eval_cmd->parsed())
            return cmd_eval(pyramid_dir, config_path, dataset, out_dir, csv_path);
        if (serve_cmd->parsed()) return cmd_serve(pyramid_dir, config_path, host, port);
        if (inspect_cmd->parsed()) return cmd_inspect(pyramid_dir, as_json);
    } catch (const Error& e) {
        std::cerr << "error: " << error_class_name(e.error_class()) << ": " << e.what() << "\n";
        return exit_code_for(e.error_class());
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
