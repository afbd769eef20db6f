#include "polyrag/layer_interaction.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "polyrag/text.hpp"

namespace polyrag {

namespace {

std::string property_as_words(const std::string& property) {
    std::string out = property;
    std::replace(out.begin(), out.end(), '_', ' ');
    return out;
}

std::string triplet_line(const KgTriplet& t) {
    return t.head + ", " + t.relation + ", " + t.tail;
}

std::string run_prompt(const LlmContext& llm, const std::string& template_name,
                       const std::map<std::string, std::string>& slots) {
    CompletionParams params = llm.params;
    params.tag = template_name;
    std::string prompt = render(llm.templates->get(template_name), slots);
    return complete(*llm.backend, prompt, params, llm.retry).text;
}

size_t distinct_vector_count(const std::vector<PhrasePoint>& points) {
    std::set<std::string> seen;
    for (const auto& p : points) {
        std::string key;
        key.reserve(size_t(p.vector.size()) * 8);
        for (Eigen::Index i = 0; i < p.vector.size(); ++i) {
            double v = p.vector[i];
            key.append(reinterpret_cast<const char*>(&v), sizeof(v));
        }
        seen.insert(std::move(key));
    }
    return seen.size();
}

}  // namespace

std::vector<PhrasePoint> ontology_phrases(const OntologySchema& schema,
                                          EmbeddingProvider& embedder) {
    std::vector<PhrasePoint> points;
    for (const auto& [cls, property] : schema.pairs()) {
        PhrasePoint p;
        p.phrase = cls + " " + property_as_words(property);
        p.vector = embedder.embed(p.phrase);
        p.origin = LayerTag::Ontology;
        p.source_ref = cls + "/" + property;
        points.push_back(std::move(p));
    }
    return points;
}

std::vector<PhrasePoint> kg_phrases(const std::vector<KgTriplet>& kg,
                                    EmbeddingProvider& embedder) {
    std::vector<PhrasePoint> points;
    std::map<std::string, size_t> index_of;
    for (const auto& t : kg) {
        std::string phrase = t.head + " " + t.relation;
        auto it = index_of.find(phrase);
        if (it != index_of.end()) {
            ++points[it->second].multiplicity;
            continue;
        }
        PhrasePoint p;
        p.phrase = phrase;
        p.vector = embedder.embed(phrase);
        p.origin = LayerTag::Kg;
        p.source_ref = t.id;
        index_of[phrase] = points.size();
        points.push_back(std::move(p));
    }
    return points;
}

RankResult rank_candidates(const std::vector<PhrasePoint>& o_points,
                           const std::vector<PhrasePoint>& k_points, const RankParams& params) {
    if (distinct_vector_count(o_points) < 2)
        throw CompletionSkipped("ontology layer has fewer than 2 distinct phrase points");
    if (distinct_vector_count(k_points) < 2)
        throw CompletionSkipped("kg layer has fewer than 2 distinct phrase points");

    auto normalized = [](const std::vector<PhrasePoint>& pts) {
        std::vector<Vector> out;
        out.reserve(pts.size());
        for (const auto& p : pts) {
            double n = p.vector.norm();
            if (n == 0.0) throw UsageError("rank_candidates: zero phrase vector");
            out.push_back(p.vector / n);
        }
        return out;
    };
    std::vector<Vector> o_vecs = normalized(o_points);
    std::vector<Vector> k_vecs = normalized(k_points);

    std::vector<Vector> pooled = o_vecs;
    pooled.insert(pooled.end(), k_vecs.begin(), k_vecs.end());
    Eigen::MatrixXd projection = principal_components(pooled, params.max_dim);

    RankResult result;
    result.ontology_model = fit_gaussian_in_projection(o_vecs, projection, params.ridge);
    result.kg_model = fit_gaussian_in_projection(k_vecs, projection, params.ridge);

    result.candidates.reserve(k_points.size());
    for (size_t i = 0; i < k_points.size(); ++i) {
        CompletionCandidate c;
        c.point = k_points[i];
        c.priority = priority_score(result.ontology_model, result.kg_model, k_vecs[i]);
        result.candidates.push_back(std::move(c));
    }
    std::sort(result.candidates.begin(), result.candidates.end(),
              [](const CompletionCandidate& a, const CompletionCandidate& b) {
                  if (a.priority != b.priority) return a.priority > b.priority;
                  if (a.point.phrase != b.point.phrase) return a.point.phrase < b.point.phrase;
                  return a.point.source_ref < b.point.source_ref;
              });

    size_t n = result.candidates.size();
    size_t selected;
    if (params.select_threshold) {
        selected = size_t(std::count_if(
            result.candidates.begin(), result.candidates.end(),
            [&](const CompletionCandidate& c) { return c.priority >= *params.select_threshold; }));
    } else {
        selected = std::min(n, size_t(std::ceil(params.select_fraction * double(n))));
        // Only genuine coverage gaps qualify: when the layers agree (priority
        // at or below zero) nothing is promoted.
        while (selected > 0 && result.candidates[selected - 1].priority <= 0.0) --selected;
    }
    result.selected_count = selected;
    for (size_t i = 0; i < selected; ++i) result.candidates[i].selected = true;
    return result;
}

std::vector<SchemaProposal> propose_schema_updates(const std::vector<CandidateCluster>& clusters,
                                                   const OntologySchema& schema,
                                                   const LlmContext& llm, InteractionLog& log) {
    std::vector<std::string> pair_names;
    for (const auto& [cls, property] : schema.pairs())
        pair_names.push_back("(" + cls + ", " + property + ")");

    std::vector<SchemaProposal> proposals;
    for (const auto& cluster : clusters) {
        std::vector<std::string> phrases;
        for (const auto& m : cluster.members) phrases.push_back(m.point.phrase);

        std::string response;
        try {
            response = run_prompt(llm, "propose_pair",
                                  {{"phrases", join(phrases, "; ")},
                                   {"domain", llm.domain},
                                   {"classes", join(schema.classes, ", ")},
                                   {"pairs", join(pair_names, ", ")}});
        } catch (const BackendError& e) {
            log.warnings.push_back(std::string("naming prompt failed: ") + e.what());
            continue;
        }

        // Single `class | property` line expected.
        SchemaProposal proposal;
        bool parsed = false;
        for (const auto& line : split_lines(response)) {
            size_t bar = line.find('|');
            if (bar == std::string::npos) continue;
            std::string cls = trim(line.substr(0, bar));
            std::string property = trim(line.substr(bar + 1));
            if (cls.empty() || property.empty()) continue;
            std::replace(property.begin(), property.end(), ' ', '_');
            proposal.proposed_class = cls;
            proposal.proposed_property = property;
            parsed = true;
            break;
        }
        if (!parsed) {
            log.notes.push_back("cluster at '" + cluster.medoid.point.phrase +
                                "': naming response unparseable, proposal skipped");
            continue;
        }
        if (schema.has_pair(proposal.proposed_class, proposal.proposed_property)) {
            log.notes.push_back("proposal (" + proposal.proposed_class + ", " +
                                proposal.proposed_property +
                                ") collides with an existing pair, dropped");
            continue;
        }
        proposal.medoid_phrase = cluster.medoid.point.phrase;
        for (const auto& m : cluster.members)
            proposal.supporting_triplets.push_back(m.point.source_ref);
        proposals.push_back(std::move(proposal));
    }
    return proposals;
}

size_t apply_proposal(KnowledgePyramid& pyramid, const SchemaProposal& proposal,
                      const LlmContext& llm, BuildReport& report) {
    if (proposal.status != SchemaProposal::Status::Accepted) return 0;

    if (!pyramid.schema.has_class(proposal.proposed_class))
        pyramid.schema.classes.push_back(proposal.proposed_class);
    // Proposals carry no range information, so the pair lands as a text data
    // property on the proposed class.
    pyramid.schema.data_properties.push_back(
        {proposal.proposed_property, proposal.proposed_class, ValueKind::Text});

    auto instances = extract_instances_for_pair(pyramid.schema, proposal.proposed_class,
                                                proposal.proposed_property, pyramid.chunks(),
                                                llm, report);
    size_t added = 0;
    for (auto& inst : instances)
        if (pyramid.add_instance(std::move(inst))) ++added;
    return added;
}

CompletionReport run_completion(KnowledgePyramid& pyramid, const CompletionConfig& config,
                                const LlmContext& llm, EmbeddingProvider& embedder) {
    CompletionReport report;
    std::optional<RankResult> cached_rank;

    for (int iteration = 0; iteration < config.max_iterations; ++iteration) {
        CompletionIteration log;

        RankResult rank;
        try {
            if (!config.refit_each_iteration && cached_rank) {
                rank = *cached_rank;
            } else {
                RankParams params{config.ridge, config.max_dim, config.select_fraction,
                                  config.select_threshold};
                rank = rank_candidates(ontology_phrases(pyramid.schema, embedder),
                                       kg_phrases(pyramid.kg(), embedder), params);
                cached_rank = rank;
            }
        } catch (const CompletionSkipped& e) {
            log.notes.push_back(std::string("completion skipped: ") + e.what());
            report.iterations.push_back(std::move(log));
            break;
        }

        for (const auto& c : rank.candidates)
            log.score_map.emplace_back(c.point.source_ref, c.priority);

        if (rank.selected_count == 0) {
            log.notes.push_back("no candidates selected");
            report.iterations.push_back(std::move(log));
            break;
        }

        std::vector<CompletionCandidate> selected(
            rank.candidates.begin(), rank.candidates.begin() + long(rank.selected_count));
        size_t k = config.kmedoids_k.value_or(
            size_t(std::ceil(std::sqrt(double(selected.size()) / 2.0))));
        k = std::clamp<size_t>(k, 1, selected.size());

        std::vector<Vector> vectors;
        vectors.reserve(selected.size());
        for (const auto& c : selected) vectors.push_back(c.point.vector);
        Clustering clustering = k_medoids(vectors, k, config.seed);

        std::vector<CandidateCluster> clusters(clustering.clusters.size());
        for (size_t ci = 0; ci < clustering.clusters.size(); ++ci) {
            clusters[ci].medoid = selected[clustering.clusters[ci].medoid];
            CompletionIteration::ClusterLog cluster_log;
            cluster_log.medoid_phrase = clusters[ci].medoid.point.phrase;
            for (size_t member : clustering.clusters[ci].members) {
                selected[member].cluster_id = ci;
                clusters[ci].members.push_back(selected[member]);
                cluster_log.member_refs.push_back(selected[member].point.source_ref);
            }
            log.clusters.push_back(std::move(cluster_log));
        }

        InteractionLog ilog;
        auto proposals = propose_schema_updates(clusters, pyramid.schema, llm, ilog);
        log.notes.insert(log.notes.end(), ilog.notes.begin(), ilog.notes.end());
        log.notes.insert(log.notes.end(), ilog.warnings.begin(), ilog.warnings.end());

        BuildReport build_report;
        for (auto& proposal : proposals) {
            if (config.auto_accept) proposal.status = SchemaProposal::Status::Accepted;
            // An earlier proposal this iteration may have claimed the pair.
            if (proposal.status == SchemaProposal::Status::Accepted &&
                pyramid.schema.has_pair(proposal.proposed_class, proposal.proposed_property)) {
                proposal.status = SchemaProposal::Status::Rejected;
                log.notes.push_back("proposal (" + proposal.proposed_class + ", " +
                                    proposal.proposed_property +
                                    ") collides with a pair accepted this iteration, dropped");
                continue;
            }
            size_t added = apply_proposal(pyramid, proposal, llm, build_report);
            if (proposal.status == SchemaProposal::Status::Accepted) {
                ++log.accepted;
                log.notes.push_back("accepted (" + proposal.proposed_class + ", " +
                                    proposal.proposed_property + "): " +
                                    std::to_string(added) + " instances added");
            }
        }
        log.proposals = std::move(proposals);

        size_t accepted = log.accepted;
        report.iterations.push_back(std::move(log));
        if (accepted == 0) break;
    }
    return report;
}

CondensationReport condense(KnowledgePyramid& pyramid, int k_neighbors, const LlmContext& llm,
                            EmbeddingProvider& embedder) {
    if (k_neighbors < 1) throw UsageError("condense: k_neighbors must be >= 1");
    if (pyramid.schema.pairs().empty())
        throw UsageError("condense: schema declares no (class, property) anchors");

    CondensationReport report;
    std::string cot = render(llm.templates->get("f_con_cot"), {});

    // head+relation phrase embeddings for every live triplet.
    std::map<std::string, Vector> phrase_vec;
    for (const auto& t : pyramid.kg())
        phrase_vec.emplace(t.id, embedder.embed(t.head + " " + t.relation));

    std::set<std::string> frozen;  // condensed at most once per pass
    for (const auto& [cls, property] : pyramid.schema.pairs()) {
        Vector anchor_vec = embedder.embed(cls + " " + property_as_words(property));

        VectorIndex index;
        for (const auto& t : pyramid.kg())
            if (!frozen.count(t.id)) index.insert(t.id, phrase_vec.at(t.id));
        if (index.empty()) continue;
        auto nearest = index.top_k(anchor_vec, size_t(k_neighbors));

        std::vector<const KgTriplet*> inputs;
        for (const auto& [id, _] : nearest) inputs.push_back(pyramid.triplet_by_id(id));

        std::vector<std::string> lines;
        for (const auto* t : inputs) lines.push_back(triplet_line(*t));

        std::string response;
        try {
            response = run_prompt(llm, "f_con",
                                  {{"triplets", join(lines, "\n")},
                                   {"domain", llm.domain},
                                   {"examples", llm.examples.empty() ? "none" : llm.examples},
                                   {"cot", cot}});
        } catch (const BackendError& e) {
            report.warnings.push_back("anchor (" + cls + ", " + property +
                                      "): backend failed, originals kept: " + e.what());
            continue;
        }

        TripletParse parsed = parse_triplet_lines(response);
        if (parsed.accepted.empty()) {
            report.warnings.push_back("anchor (" + cls + ", " + property +
                                      "): response had no parseable triplets, originals kept");
            continue;
        }
        if (parsed.accepted.size() > inputs.size()) {
            report.warnings.push_back("anchor (" + cls + ", " + property +
                                      "): output larger than input, rejected");
            continue;
        }

        // Outputs that echo an input keep the original triplet; new outputs
        // replace the inputs they summarize.
        auto matches_input = [&](const std::array<std::string, 3>& t) -> const KgTriplet* {
            for (const auto* in : inputs)
                if (in->head == t[0] && in->relation == t[1] && in->tail == t[2]) return in;
            return nullptr;
        };
        std::set<std::string> echoed;
        std::vector<std::array<std::string, 3>> new_outputs;
        for (const auto& t : parsed.accepted) {
            if (const KgTriplet* in = matches_input(t))
                echoed.insert(in->id);
            else
                new_outputs.push_back(t);
        }
        std::vector<std::string> replaced_ids;
        for (const auto* in : inputs)
            if (!echoed.count(in->id)) replaced_ids.push_back(in->id);

        CondensationRecord record;
        record.anchor = {cls, property};
        for (const auto* in : inputs) record.input_triplet_ids.push_back(in->id);

        std::string replaced_source =
            replaced_ids.empty() ? inputs.front()->source_chunk
                                 : pyramid.triplet_by_id(replaced_ids.front())->source_chunk;

        int tokens_in = 0;
        for (const auto& l : lines) tokens_in += count_tokens_ws(l);

        // Mutate the KG: drop replaced inputs, then add the new summaries.
        for (const auto& id : replaced_ids) pyramid.remove_triplet(id);
        for (const auto& t : new_outputs) {
            KgTriplet nt;
            nt.head = t[0];
            nt.relation = t[1];
            nt.tail = t[2];
            nt.source_chunk = replaced_source;
            nt.condensed_from = replaced_ids;
            auto id = pyramid.add_triplet(std::move(nt));
            if (id) {
                frozen.insert(*id);
                phrase_vec.emplace(*id, embedder.embed(t[0] + " " + t[1]));
            }
        }
        for (const auto& id : echoed) frozen.insert(id);

        int tokens_out = 0;
        for (const auto& id : echoed)
            tokens_out += count_tokens_ws(triplet_line(*pyramid.triplet_by_id(id)));
        for (const auto& t : new_outputs)
            tokens_out += count_tokens_ws(t[0] + ", " + t[1] + ", " + t[2]);
        record.token_delta = tokens_in - tokens_out;

        for (const auto& id : echoed) record.output_triplets.push_back(*pyramid.triplet_by_id(id));
        for (const auto& t : new_outputs) {
            for (const auto& live : pyramid.kg())
                if (live.head == t[0] && live.relation == t[1] && live.tail == t[2]) {
                    record.output_triplets.push_back(live);
                    break;
                }
        }
        report.records.push_back(std::move(record));
    }
    return report;
}

std::string CompletionReport::to_json_lines() const {
    std::string out;
    for (size_t i = 0; i < iterations.size(); ++i) {
        const auto& it = iterations[i];
        nlohmann::json obj;
        obj["iteration"] = i + 1;
        obj["scores"] = nlohmann::json::array();
        for (const auto& [ref, pr] : it.score_map)
            obj["scores"].push_back({{"point", ref}, {"priority", pr}});
        obj["clusters"] = nlohmann::json::array();
        for (const auto& c : it.clusters)
            obj["clusters"].push_back({{"medoid", c.medoid_phrase},
                                       {"members", c.member_refs}});
        obj["proposals"] = nlohmann::json::array();
        for (const auto& p : it.proposals) {
            const char* status = p.status == SchemaProposal::Status::Accepted  ? "accepted"
                                 : p.status == SchemaProposal::Status::Rejected ? "rejected"
                                                                                : "pending";
            obj["proposals"].push_back({{"class", p.proposed_class},
                                        {"property", p.proposed_property},
                                        {"medoid", p.medoid_phrase},
                                        {"supporting", p.supporting_triplets},
                                        {"status", status}});
        }
        obj["accepted"] = it.accepted;
        obj["notes"] = it.notes;
        out += obj.dump() + "\n";
    }
    return out;
}

std::string CompletionReport::score_map_json() const {
    nlohmann::json obj = nlohmann::json::object();
    if (!iterations.empty())
        for (const auto& [ref, pr] : iterations.back().score_map) obj[ref] = pr;
    return obj.dump(2) + "\n";
}

std::string CondensationReport::to_json_lines() const {
    std::string out;
    for (const auto& r : records) {
        nlohmann::json obj;
        obj["anchor"] = {{"class", r.anchor.first}, {"property", r.anchor.second}};
        obj["inputs"] = r.input_triplet_ids;
        obj["outputs"] = nlohmann::json::array();
        for (const auto& t : r.output_triplets)
            obj["outputs"].push_back({{"id", t.id},
                                      {"head", t.head},
                                      {"relation", t.relation},
                                      {"tail", t.tail},
                                      {"condensed_from", t.condensed_from}});
        obj["token_delta"] = r.token_delta;
        out += obj.dump() + "\n";
    }
    for (const auto& w : warnings) {
        nlohmann::json obj;
        obj["warning"] = w;
        out += obj.dump() + "\n";
    }
    return out;
}

}  // namespace polyrag
