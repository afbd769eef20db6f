#include "polyrag/layer_construction.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "polyrag/text.hpp"

namespace polyrag {

namespace {

std::string run_prompt(const LlmContext& llm, const std::string& template_name,
                       const std::map<std::string, std::string>& slots) {
    CompletionParams params = llm.params;
    params.tag = template_name;
    std::string prompt = render(llm.templates->get(template_name), slots);
    return complete(*llm.backend, prompt, params, llm.retry).text;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    return s;
}

// `subject | property | value` lines; anything else is a reject.
struct PipeParse {
    std::vector<std::array<std::string, 3>> accepted;
    std::vector<std::string> rejected;
};

PipeParse parse_pipe_lines(const std::string& text) {
    PipeParse out;
    for (const auto& line : split_lines(text)) {
        if (lower(line) == "none") continue;
        std::vector<std::string> parts;
        size_t start = 0;
        while (true) {
            size_t bar = line.find('|', start);
            if (bar == std::string::npos) {
                parts.push_back(trim(line.substr(start)));
                break;
            }
            parts.push_back(trim(line.substr(start, bar - start)));
            start = bar + 1;
        }
        bool ok = parts.size() == 3 && std::none_of(parts.begin(), parts.end(),
                                                    [](const std::string& p) { return p.empty(); });
        if (ok)
            out.accepted.push_back({parts[0], parts[1], parts[2]});
        else
            out.rejected.push_back(line);
    }
    return out;
}

std::vector<OntologyInstance> extract_instances_impl(
    const OntologySchema& schema,
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const std::vector<TextChunk>& chunks, const LlmContext& llm, BuildReport& report) {
    if (pairs.empty()) throw UsageError("extract_instances: schema declares no pairs");

    std::vector<OntologyInstance> instances;
    std::set<std::array<std::string, 3>> seen;  // (subject, property, value)
    auto& counts = report.stages["f_ins"];

    for (const auto& [cls, property] : pairs) {
        for (const auto& chunk : chunks) {
            std::string response;
            try {
                ++counts.prompts;
                response = run_prompt(llm, "f_ins",
                                      {{"p", chunk.text},
                                       {"domain", llm.domain},
                                       {"c", cls},
                                       {"a", property},
                                       {"examples", llm.examples_slot()}});
            } catch (const BackendError&) {
                report.skipped_chunks.push_back(chunk.id);
                continue;
            }
            PipeParse parsed = parse_pipe_lines(response);
            for (const auto& line : parsed.rejected) {
                ++counts.rejected;
                report.rejected_lines.emplace_back("f_ins", line);
            }
            for (const auto& [subject, prop, value] : parsed.accepted) {
                if (prop != property) {
                    ++counts.rejected;
                    report.rejected_lines.emplace_back(
                        "f_ins", subject + " | " + prop + " | " + value);
                    continue;
                }
                if (!seen.insert({subject, property, value}).second)
                    continue;  // first-seen provenance wins
                OntologyInstance inst;
                inst.subject = subject;
                inst.subject_class = cls;
                inst.property = property;
                inst.value = value;
                inst.value_kind = schema.pair_value_kind(cls, property).value_or(ValueKind::Text);
                inst.source_chunk = chunk.id;
                instances.push_back(std::move(inst));
                ++counts.accepted;
            }
        }
    }
    return instances;
}

}  // namespace

std::vector<OntologyInstance> extract_instances(const OntologySchema& schema,
                                                const std::vector<TextChunk>& chunks,
                                                const LlmContext& llm, BuildReport& report) {
    return extract_instances_impl(schema, schema.pairs(), chunks, llm, report);
}

std::vector<OntologyInstance> extract_instances_for_pair(
    const OntologySchema& schema, const std::string& cls, const std::string& property,
    const std::vector<TextChunk>& chunks, const LlmContext& llm, BuildReport& report) {
    return extract_instances_impl(schema, {{cls, property}}, chunks, llm, report);
}

std::vector<std::string> paraphrase(const TextChunk& chunk, const LlmContext& llm) {
    std::string response = run_prompt(
        llm, "f_par", {{"p", chunk.text}, {"examples", llm.examples_slot()}});
    return split_lines(response);
}

std::vector<std::string> extract_entities(const std::vector<std::string>& claims,
                                          const LlmContext& llm, BuildReport& report) {
    if (claims.empty()) return {};
    auto& counts = report.stages["f_ent"];
    ++counts.prompts;
    std::string response = run_prompt(llm, "f_ent",
                                      {{"claims", join(claims, "\n")},
                                       {"examples", llm.examples_slot()}});
    std::vector<std::string> entities;
    std::set<std::string> seen_ci;
    for (const auto& line : split_lines(response)) {
        if (line.find(',') != std::string::npos) {
            ++counts.rejected;
            report.rejected_lines.emplace_back("f_ent", line);
            continue;
        }
        if (!seen_ci.insert(lower(line)).second) continue;
        entities.push_back(line);
        ++counts.accepted;
    }
    return entities;
}

RawTriplets complete_relations(const std::vector<std::string>& claims,
                               const std::vector<std::string>& entities,
                               const LlmContext& llm, BuildReport& report) {
    RawTriplets out;
    if (claims.empty()) return out;

    auto& counts = report.stages["f_rel"];
    ++counts.prompts;
    std::string response = run_prompt(llm, "f_rel",
                                      {{"claims", join(claims, "\n")},
                                       {"entities", join(entities, ", ")},
                                       {"examples", llm.examples_slot()}});
    TripletParse parsed = parse_triplet_lines(response);
    for (const auto& line : parsed.rejected) {
        ++counts.rejected;
        report.rejected_lines.emplace_back("f_rel", line);
    }
    std::set<std::string> known;
    for (const auto& e : entities) known.insert(lower(e));
    for (auto& t : parsed.accepted) {
        ++counts.accepted;
        size_t index = out.triplets.size();
        if (!known.count(lower(t[0])) || !known.count(lower(t[2]))) {
            out.flagged.push_back(index);
            report.flagged_triplets.push_back(t[0] + ", " + t[1] + ", " + t[2]);
        }
        out.triplets.push_back(std::move(t));
    }
    return out;
}

std::vector<std::array<std::string, 3>> disambiguate(
    const std::vector<std::array<std::string, 3>>& triplets,
    const std::vector<std::string>& entities, const LlmContext& llm, BuildReport& report) {
    // Exact-duplicate pre-pass runs regardless of the backend.
    std::vector<std::array<std::string, 3>> unique;
    std::set<std::array<std::string, 3>> seen;
    for (const auto& t : triplets)
        if (seen.insert(t).second) unique.push_back(t);
    if (unique.empty()) return unique;

    std::vector<std::string> lines;
    lines.reserve(unique.size());
    for (const auto& t : unique) lines.push_back(t[0] + ", " + t[1] + ", " + t[2]);

    auto& counts = report.stages["f_dis"];
    ++counts.prompts;
    std::string response = run_prompt(llm, "f_dis",
                                      {{"triplets", join(lines, "\n")},
                                       {"entities", join(entities, ", ")},
                                       {"examples", llm.examples_slot()}});
    TripletParse parsed = parse_triplet_lines(response);
    for (const auto& line : parsed.rejected) {
        ++counts.rejected;
        report.rejected_lines.emplace_back("f_dis", line);
    }
    if (parsed.accepted.empty()) {
        report.warnings.push_back(
            "disambiguation returned no parseable triplets; originals kept");
        return unique;
    }
    std::vector<std::array<std::string, 3>> refined;
    std::set<std::array<std::string, 3>> refined_seen;
    for (auto& t : parsed.accepted) {
        if (!refined_seen.insert(t).second) continue;
        ++counts.accepted;
        refined.push_back(std::move(t));
    }
    return refined;
}

std::vector<KgTriplet> extract_kg(const std::vector<TextChunk>& chunks, const LlmContext& llm,
                                  BuildReport& report) {
    std::vector<KgTriplet> result;
    for (const auto& chunk : chunks) {
        std::vector<std::string> claims;
        try {
            ++report.stages["f_par"].prompts;
            claims = paraphrase(chunk, llm);
        } catch (const BackendError&) {
            report.skipped_chunks.push_back(chunk.id);
            continue;
        }
        if (claims.empty()) {
            report.low_yield_chunks.push_back(chunk.id);
            continue;
        }
        report.stages["f_par"].accepted += int(claims.size());

        try {
            std::vector<std::string> entities = extract_entities(claims, llm, report);
            RawTriplets raw = complete_relations(claims, entities, llm, report);
            auto refined = disambiguate(raw.triplets, entities, llm, report);
            for (auto& [head, relation, tail] : refined) {
                KgTriplet t;
                t.head = head;
                t.relation = relation;
                t.tail = tail;
                t.source_chunk = chunk.id;
                result.push_back(std::move(t));
            }
        } catch (const BackendError&) {
            report.skipped_chunks.push_back(chunk.id);
        }
    }
    return result;
}

std::string BuildReport::to_json_string() const {
    nlohmann::json obj;
    for (const auto& [stage, c] : stages)
        obj["stages"][stage] = {{"prompts", c.prompts},
                                {"accepted", c.accepted},
                                {"rejected", c.rejected}};
    obj["skipped_chunks"] = skipped_chunks;
    obj["low_yield_chunks"] = low_yield_chunks;
    obj["rejected_lines"] = nlohmann::json::array();
    for (const auto& [stage, line] : rejected_lines)
        obj["rejected_lines"].push_back({{"stage", stage}, {"line", line}});
    obj["flagged_triplets"] = flagged_triplets;
    obj["warnings"] = warnings;
    return obj.dump(2) + "\n";
}

}  // namespace polyrag
