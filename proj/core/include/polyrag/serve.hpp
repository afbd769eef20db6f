#pragma once
// HTTP surface for programmatic consumers: POST /answer {question} returns
// {answer, resolved_layer, evidence, telemetry}.

#include <memory>
#include <string>

#include "polyrag/query.hpp"

namespace polyrag {

// Deterministic JSON projection of an answered query.
std::string answered_query_to_json(const AnsweredQuery& result, bool pretty);

class AnswerServer {
public:
    AnswerServer(PyramidIndexes& indexes, const LlmContext& llm, const QueryConfig& config);
    ~AnswerServer();

    // Blocks until stop(); returns false if the port cannot be bound.
    bool listen(const std::string& host, int port);
    // Binds an ephemeral port and serves from a background thread; returns
    // the bound port. Used by tests.
    int start_async(const std::string& host);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace polyrag
