#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "polyrag/layer_interaction.hpp"
#include "polyrag/rng.hpp"
#include "polyrag/schema_io.hpp"

using namespace polyrag;
using testutil::make_llm;

TEST_SUITE_BEGIN("interaction");

namespace {

// Builds the toy pyramid through the library pipeline.
KnowledgePyramid build_toy(const testutil::ToyFixture& toy) {
    KnowledgePyramid p;
    p.schema = load_schema(toy.schema());
    for (auto& c : load_corpus(toy.corpus())) p.add_chunk(std::move(c));
    BuildReport report;
    for (auto& i : extract_instances(p.schema, p.chunks(), toy.llm, report))
        p.add_instance(std::move(i));
    for (auto& t : extract_kg(p.chunks(), toy.llm, report)) p.add_triplet(std::move(t));
    return p;
}

std::shared_ptr<ScriptedBackend> backend_with(std::vector<ScriptRule> rules) {
    return std::make_shared<ScriptedBackend>(std::move(rules),
                                             ScriptRule{"", "", "", "NONE", "", false});
}

}  // namespace

TEST_CASE("ontology_phrases spells out properties with spaces") {
    LocalHashEmbedder embedder(32, 1);
    OntologySchema schema;
    schema.classes = {"staff", "Staff"};
    schema.object_properties = {{"graduated_from", "staff", "staff"}};
    schema.data_properties = {{"current_affiliations", "Staff", ValueKind::Text}};

    auto points = ontology_phrases(schema, embedder);
    REQUIRE(points.size() == 2);
    CHECK(points[0].phrase == "staff graduated from");
    CHECK(points[1].phrase == "Staff current affiliations");
    CHECK(points[0].origin == LayerTag::Ontology);

    OntologySchema empty;
    CHECK(ontology_phrases(empty, embedder).empty());
}

TEST_CASE("kg_phrases collapses duplicate head+relation with multiplicity") {
    LocalHashEmbedder embedder(32, 1);
    std::vector<KgTriplet> kg = {{"t1", "Prof. A", "works in", "Z", "", {}},
                                 {"t2", "Prof. A", "works in", "Y", "", {}},
                                 {"t3", "Prof. B", "leads", "Lab", "", {}}};
    auto points = kg_phrases(kg, embedder);
    REQUIRE(points.size() == 2);
    CHECK(points[0].phrase == "Prof. A works in");
    CHECK(points[0].multiplicity == 2);
    CHECK(points[0].source_ref == "t1");
    CHECK(points[1].multiplicity == 1);
    CHECK(kg_phrases({}, embedder).empty());
}

namespace {

std::vector<PhrasePoint> synthetic_points(Rng& rng, LayerTag tag, const Vector& center,
                                          double spread, int count, const char* prefix) {
    std::vector<PhrasePoint> pts;
    for (int i = 0; i < count; ++i) {
        Vector v = center;
        for (int d = 0; d < v.size(); ++d) v[d] += spread * rng.normal();
        pts.push_back({prefix + std::to_string(i), v, tag, prefix + std::to_string(i), 1});
    }
    return pts;
}

}  // namespace

TEST_CASE("rank_candidates: same distribution gives small scores everywhere") {
    Rng rng(21);
    Vector center(6);
    center << 5, 0, 0, 0, 0, 0;
    auto o = synthetic_points(rng, LayerTag::Ontology, center, 0.3, 30, "o");
    auto k = synthetic_points(rng, LayerTag::Kg, center, 0.3, 30, "k");
    RankParams params{1e-4, 4, 0.2, std::nullopt};
    auto result = rank_candidates(o, k, params);

    CHECK(result.selected_count <= 6);  // at most ceil(0.2 * 30)
    // Same underlying distribution: no candidate shows a divergence spike
    // beyond a small fraction of the peak density product.
    double peak = std::exp(log_density_reduced(result.kg_model, result.kg_model.mean));
    for (const auto& c : result.candidates)
        CHECK(std::abs(c.priority) < 0.05 * peak * peak + 1.0);
}

TEST_CASE("identical ontology and KG phrase sets select nothing") {
    LocalHashEmbedder embedder(32, 3);
    std::vector<PhrasePoint> o, k;
    for (const char* phrase : {"staff works in", "staff teaches", "staff office"}) {
        o.push_back({phrase, embedder.embed(phrase), LayerTag::Ontology, phrase, 1});
        k.push_back({phrase, embedder.embed(phrase), LayerTag::Kg, phrase, 1});
    }
    RankParams params{1e-4, 4, 0.5, std::nullopt};
    auto result = rank_candidates(o, k, params);
    for (const auto& c : result.candidates) CHECK(c.priority == 0.0);
    CHECK(result.selected_count == 0);
}

TEST_CASE("rank_candidates: a KG-only cluster occupies the top ranks") {
    Rng rng(22);
    Vector shared(6), only(6);
    shared << 5, 0, 0, 0, 0, 0;
    only << 0, 5, 0, 0, 0, 0;
    auto o = synthetic_points(rng, LayerTag::Ontology, shared, 0.3, 25, "o");
    auto k_shared = synthetic_points(rng, LayerTag::Kg, shared, 0.3, 25, "ks");
    auto k_only = synthetic_points(rng, LayerTag::Kg, only, 0.3, 25, "kn");
    std::vector<PhrasePoint> k = k_shared;
    k.insert(k.end(), k_only.begin(), k_only.end());

    RankParams params{1e-4, 4, 0.2, std::nullopt};
    auto result = rank_candidates(o, k, params);
    REQUIRE(result.selected_count == 10);
    for (size_t i = 0; i < result.selected_count; ++i)
        CHECK(result.candidates[i].point.source_ref.substr(0, 2) == "kn");
}

TEST_CASE("rank_candidates: degenerate layers are reported as skips") {
    LocalHashEmbedder embedder(16, 1);
    Vector v = embedder.embed("same");
    std::vector<PhrasePoint> degenerate = {{"same", v, LayerTag::Kg, "a", 1},
                                           {"same", v, LayerTag::Kg, "b", 1}};
    std::vector<PhrasePoint> fine = {{"x", embedder.embed("x"), LayerTag::Kg, "x", 1},
                                     {"y", embedder.embed("y"), LayerTag::Kg, "y", 1}};
    RankParams params{1e-4, 4, 0.2, std::nullopt};
    CHECK_THROWS_AS(rank_candidates(degenerate, fine, params), CompletionSkipped);
    CHECK_THROWS_AS(rank_candidates(fine, degenerate, params), CompletionSkipped);
}

TEST_CASE("rank_candidates selection is invariant under positive rescaling") {
    Rng rng(23);
    Vector c1(5), c2(5);
    c1 << 3, 1, 0, 0, 0;
    c2 << 0, 3, 1, 0, 0;
    auto o = synthetic_points(rng, LayerTag::Ontology, c1, 0.4, 12, "o");
    auto k = synthetic_points(rng, LayerTag::Kg, c2, 0.6, 15, "k");
    RankParams params{1e-4, 3, 0.3, std::nullopt};

    auto baseline = rank_candidates(o, k, params);
    auto scaled_o = o;
    auto scaled_k = k;
    for (auto& p : scaled_o) p.vector *= 3.0;
    for (auto& p : scaled_k) p.vector *= 3.0;
    auto scaled = rank_candidates(scaled_o, scaled_k, params);

    REQUIRE(scaled.selected_count == baseline.selected_count);
    for (size_t i = 0; i < baseline.selected_count; ++i)
        CHECK(scaled.candidates[i].point.source_ref ==
              baseline.candidates[i].point.source_ref);
}

TEST_CASE("rank_candidates honors an absolute threshold") {
    Rng rng(24);
    Vector c1(4), c2(4);
    c1 << 4, 0, 0, 0;
    c2 << 0, 4, 0, 0;
    auto o = synthetic_points(rng, LayerTag::Ontology, c1, 0.3, 10, "o");
    auto k = synthetic_points(rng, LayerTag::Kg, c2, 0.3, 10, "k");
    RankParams params{1e-4, 3, 0.2, 0.0};
    auto result = rank_candidates(o, k, params);
    for (size_t i = 0; i < result.candidates.size(); ++i)
        CHECK((i < result.selected_count) == (result.candidates[i].priority >= 0.0));
}

TEST_CASE("propose_schema_updates drops collisions and skips unparseable names") {
    auto backend = backend_with(
        {{"propose_pair", "published", "", "Staff | has_published_in", "", false},
         {"propose_pair", "existing", "", "Staff | works_in", "", false}});
    auto llm = make_llm(*backend);
    LocalHashEmbedder embedder(16, 1);
    OntologySchema schema = testutil::tiny_schema();

    auto cluster = [&](const std::string& phrase) {
        CompletionCandidate c;
        c.point = {phrase, embedder.embed(phrase), LayerTag::Kg, "t1", 1};
        c.priority = 1.0;
        return CandidateCluster{c, {c}};
    };

    InteractionLog log;
    auto proposals = propose_schema_updates(
        {cluster("X published a paper"), cluster("existing works in"), cluster("noise")},
        schema, llm, log);
    REQUIRE(proposals.size() == 1);
    CHECK(proposals[0].proposed_class == "Staff");
    CHECK(proposals[0].proposed_property == "has_published_in");
    CHECK(proposals[0].status == SchemaProposal::Status::Pending);
    REQUIRE(proposals[0].supporting_triplets == std::vector<std::string>{"t1"});
    CHECK(log.notes.size() == 2);  // one collision drop, one unparseable skip
}

TEST_CASE("apply_proposal: accepted proposals add the pair and extract instances") {
    auto backend = backend_with(
        {{"f_ins", "property of has_published_in", "", "Alice | has_published_in | JCC",
          "", false}});
    auto llm = make_llm(*backend);

    KnowledgePyramid p;
    p.schema = testutil::tiny_schema();
    p.add_chunk({"c1", "d", 0, "Alice published in JCC."});

    SchemaProposal proposal;
    proposal.proposed_class = "Staff";
    proposal.proposed_property = "has_published_in";
    proposal.supporting_triplets = {"t1"};

    SUBCASE("pending proposal leaves the pyramid untouched") {
        KnowledgePyramid before = p;
        BuildReport report;
        CHECK(apply_proposal(p, proposal, llm, report) == 0);
        CHECK(p == before);
    }
    SUBCASE("accepted proposal grows schema and instances, schema stays valid") {
        proposal.status = SchemaProposal::Status::Accepted;
        BuildReport report;
        size_t added = apply_proposal(p, proposal, llm, report);
        CHECK(added == 1);
        CHECK(p.schema.has_pair("Staff", "has_published_in"));
        CHECK(validate_schema(p.schema).ok());
        REQUIRE(p.instances().size() == 1);
        CHECK(p.instances()[0].value == "JCC");
    }
}

TEST_CASE("run_completion with max_iterations = 0 is the identity") {
    testutil::ToyFixture toy;
    KnowledgePyramid p = build_toy(toy);
    KnowledgePyramid before = p;
    CompletionConfig config = toy.config.completion_config();
    config.max_iterations = 0;
    auto report = run_completion(p, config, toy.llm, *toy.embedder);
    CHECK(report.iterations.empty());
    CHECK(p == before);
}

TEST_CASE("toy completion: one proposal accepted in iteration 1, none in iteration 2") {
    testutil::ToyFixture toy;
    KnowledgePyramid p = build_toy(toy);
    REQUIRE(p.kg().size() == 23);
    REQUIRE(p.instances().size() == 14);

    CompletionConfig config = toy.config.completion_config();
    config.auto_accept = true;
    auto report = run_completion(p, config, toy.llm, *toy.embedder);

    REQUIRE(report.iterations.size() == 2);
    CHECK(report.iterations[0].accepted == 1);
    CHECK(report.iterations[1].accepted == 0);
    REQUIRE(report.iterations[0].proposals.size() == 1);
    CHECK(report.iterations[0].proposals[0].proposed_property == "has_published_in");
    CHECK(p.schema.has_pair("Staff", "has_published_in"));
    CHECK(p.instances().size() == 18);  // four publication facts land
    CHECK(p.kg().size() == 23);         // completion never touches the KG

    // Idempotence after convergence: a further round accepts nothing.
    auto again = run_completion(p, config, toy.llm, *toy.embedder);
    for (const auto& it : again.iterations) CHECK(it.accepted == 0);

    // The score-map export covers every KG phrase point.
    CHECK(report.iterations[0].score_map.size() == 23);
}

TEST_CASE("condense merges the scripted pair and strictly shrinks the KG") {
    testutil::ToyFixture toy;
    KnowledgePyramid p = build_toy(toy);
    CompletionConfig config = toy.config.completion_config();
    config.auto_accept = true;
    run_completion(p, config, toy.llm, *toy.embedder);

    std::set<std::string> pre_ids;
    for (const auto& t : p.kg()) pre_ids.insert(t.id);
    size_t before = p.kg().size();

    auto report = condense(p, toy.config.k_neighbors, toy.llm, *toy.embedder);
    CHECK(p.kg().size() == before - 1);
    REQUIRE(report.records.size() == 1);
    const auto& record = report.records[0];
    CHECK(record.anchor == std::pair<std::string, std::string>{"Staff", "works_in"});
    CHECK(record.output_triplets.size() <= record.input_triplet_ids.size());
    CHECK(record.token_delta > 0);

    const KgTriplet* merged = nullptr;
    for (const auto& t : p.kg())
        if (t.relation == "is_a_member_of") merged = &t;
    REQUIRE(merged != nullptr);
    CHECK(merged->head == "Alice");
    CHECK(merged->tail == "Computer Science Department");
    REQUIRE(merged->condensed_from.size() == 2);
    for (const auto& id : merged->condensed_from) CHECK(pre_ids.count(id) == 1);

    // The replaced phrasings are gone.
    for (const auto& t : p.kg()) {
        CHECK_FALSE((t.head == "Alice" && t.relation == "works in"));
        CHECK_FALSE((t.head == "Alice" && t.relation == "is with"));
    }
}

TEST_CASE("condense rejects outputs larger than their input") {
    auto backend = backend_with(
        {{"f_con", "", "", "A, r, B\nA, r2, B\nA, r3, B", "", false}});
    auto llm = make_llm(*backend);
    LocalHashEmbedder embedder(16, 1);

    KnowledgePyramid p;
    p.schema = testutil::tiny_schema();
    p.add_chunk({"c1", "d", 0, "text"});
    p.add_triplet({"", "A", "r", "B", "c1", {}});
    p.add_triplet({"", "A", "q", "C", "c1", {}});

    auto report = condense(p, 2, llm, embedder);
    CHECK(p.kg().size() == 2);  // rejected, originals kept
    bool warned = false;
    for (const auto& w : report.warnings)
        warned = warned || w.find("larger than input") != std::string::npos;
    CHECK(warned);
}

TEST_CASE("condense skips anchors whose response is unparseable, keeping originals") {
    auto backend = backend_with({});  // fallback NONE parses to zero triplets
    auto llm = make_llm(*backend);
    LocalHashEmbedder embedder(16, 1);

    KnowledgePyramid p;
    p.schema = testutil::tiny_schema();
    p.add_chunk({"c1", "d", 0, "text"});
    p.add_triplet({"", "A", "r", "B", "c1", {}});
    auto report = condense(p, 5, llm, embedder);
    CHECK(p.kg().size() == 1);
    CHECK_FALSE(report.warnings.empty());
    CHECK(report.records.empty());
}

TEST_CASE("condense with an anchor whose neighborhood is already condensed is a no-op") {
    // One anchor consumes everything; remaining anchors see nothing unfrozen.
    auto backend = backend_with({{"f_con", "", "", "A, r, B", "", false}});
    auto llm = make_llm(*backend);
    LocalHashEmbedder embedder(16, 1);

    KnowledgePyramid p;
    p.schema = testutil::tiny_schema();  // three (class, property) anchors
    p.add_chunk({"c1", "d", 0, "text"});
    p.add_triplet({"", "A", "r", "B", "c1", {}});

    auto report = condense(p, 5, llm, embedder);
    REQUIRE(report.records.size() == 1);  // later anchors skipped silently
    CHECK(p.kg().size() == 1);
}

TEST_SUITE_END();
