#include "polyrag/serve.hpp"

#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace polyrag {

using nlohmann::json;

std::string answered_query_to_json(const AnsweredQuery& result, bool pretty) {
    json obj;
    obj["question"] = result.question;
    obj["answer"] = result.answer;
    obj["resolved_layer"] = layer_name(result.resolved_layer);

    json evidence;
    switch (result.resolved_layer) {
        case Layer::Ontology: {
            evidence["columns"] = result.bindings.columns;
            evidence["rows"] = result.bindings.rows;
            break;
        }
        case Layer::Kg: {
            evidence["triplets"] = json::array();
            for (const auto& t : result.triplets)
                evidence["triplets"].push_back({{"id", t.id},
                                                {"head", t.head},
                                                {"relation", t.relation},
                                                {"tail", t.tail},
                                                {"source_chunk", t.source_chunk}});
            break;
        }
        case Layer::RawText: {
            evidence["chunks"] = json::array();
            for (const auto& c : result.chunks)
                evidence["chunks"].push_back({{"id", c.id}, {"text", c.text}});
            break;
        }
    }
    obj["evidence"] = evidence;

    json telemetry;
    telemetry["stages"] = json::array();
    for (const auto& s : result.telemetry.stages)
        telemetry["stages"].push_back({{"name", s.name},
                                       {"prompt_tokens", s.prompt_tokens},
                                       {"completion_tokens", s.completion_tokens}});
    if (result.telemetry.agreement) telemetry["agreement"] = *result.telemetry.agreement;
    telemetry["notes"] = result.telemetry.notes;
    obj["telemetry"] = telemetry;

    return pretty ? obj.dump(2) + "\n" : obj.dump();
}

struct AnswerServer::Impl {
    Impl(PyramidIndexes& idx, const LlmContext& ctx, const QueryConfig& cfg)
        : indexes(idx), llm(ctx), config(cfg) {
        server.Post("/answer", [this](const httplib::Request& req, httplib::Response& res) {
            json body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.contains("question") ||
                !body["question"].is_string()) {
                res.status = 400;
                res.set_content(R"({"error":"usage","message":"body must be {\"question\": \"…\"}"})",
                                "application/json");
                return;
            }
            try {
                AnsweredQuery result =
                    answer(body["question"].get<std::string>(), indexes, llm, config);
                res.set_content(answered_query_to_json(result, false), "application/json");
            } catch (const Error& e) {
                res.status = e.error_class() == ErrorClass::Usage ? 400 : 502;
                json err{{"error", error_class_name(e.error_class())}, {"message", e.what()}};
                res.set_content(err.dump(), "application/json");
            }
        });
        server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"status":"ok"})", "application/json");
        });
    }

    PyramidIndexes& indexes;
    LlmContext llm;
    QueryConfig config;
    httplib::Server server;
    std::thread thread;
};

AnswerServer::AnswerServer(PyramidIndexes& indexes, const LlmContext& llm,
                           const QueryConfig& config)
    : impl_(std::make_unique<Impl>(indexes, llm, config)) {}

AnswerServer::~AnswerServer() { stop(); }

bool AnswerServer::listen(const std::string& host, int port) {
    return impl_->server.listen(host, port);
}

int AnswerServer::start_async(const std::string& host) {
    int port = impl_->server.bind_to_any_port(host);
    if (port < 0) throw Error(ErrorClass::Internal, "could not bind a port");
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void AnswerServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace polyrag
