#include "polyrag/llm.hpp"

namespace polyrag {

// Default prompt wording for every stage. Deployments may override any of
// these with a same-named .txt file in the configured template directory.
const std::vector<PromptTemplate>& default_templates() {
    static const std::vector<PromptTemplate> templates = {
        {"f_ins",
         {"p", "domain", "c", "a", "examples"},
         "Given a paragraph {p} from the {domain} domain, please identify instances of the "
         "Ontology relationship where a class {c} has the property of {a}. Note that the "
         "property may consist of multiple entities.{examples} Respond with one instance per "
         "line in the form: subject | property | value. If there are none, respond with NONE."},

        {"f_par",
         {"p", "examples"},
         "Determine the factual claims from a given paragraph {p}. Put these facts into short "
         "phrases with basic grammar. Remember that every statement should have a distinct "
         "meaning, and pronouns should be avoided.{examples} Respond with one claim per line."},

        {"f_ent",
         {"claims", "examples"},
         "Extract the noun entities in phrases from the given sentences {claims}. The entities "
         "should not contain any comma, and each entity should be unique during "
         "extraction.{examples} Respond with one entity per line."},

        {"f_rel",
         {"claims", "entities", "examples"},
         "Given the reference context {claims} and relevant entities {entities}, complete the "
         "relations between two entities. Notice that a triple should only contain one entity "
         "as head, one verb or verb phrase as relation, and one entity as tail. Separate the "
         "head, relation, and tail with a comma.{examples} Respond with one triple per line."},

        {"f_dis",
         {"triplets", "entities", "examples"},
         "You are given several triples {triplets} with their entities {entities}. These "
         "triples consist of subject-predicate-object elements, separated with a comma, but "
         "may contain ambiguities or inaccuracies. Your task is to refine and disambiguate "
         "these triples to ensure that they accurately reflect the entities and relationships "
         "described in their source texts without duplication or omissions. If the "
         "relationships have the same semantic meaning, rewrite the triples with the same "
         "relation. If the triple has already been mentioned with the same meaning as previous "
         "triples, delete it.{examples} Respond with one triple per line, separated with "
         "commas."},

        {"f_con",
         {"triplets", "domain", "examples", "cot"},
         "Please condense the set of knowledge graph triplets {triplets} obtained from the "
         "{domain} domain by eliminating redundant triplets and summarizing the remaining ones "
         "in a more concise manner. Here are some examples for your reference: {examples}. The "
         "condensation process should follow the logic of {cot}. Respond with one triplet per "
         "line in the form: head, relation, tail."},

        // Fixed reasoning scaffold substituted into f_con's {cot} slot.
        {"f_con_cot",
         {},
         "first grouping triplets that state the same fact about the same subject, then "
         "merging each group into one triplet with the most standard relation wording, keeping "
         "every non-redundant triplet unchanged"},

        {"propose_pair",
         {"phrases", "domain", "classes", "pairs"},
         "The following related phrases appear in a knowledge graph from the {domain} domain: "
         "{phrases}. The existing Ontology classes are {classes} and the existing (class, "
         "property) pairs are {pairs}. Propose one new Ontology class and property that would "
         "capture the knowledge expressed by these phrases. Respond with a single line in the "
         "form: class | property. If no sensible pair exists, respond with NONE."},

        {"query_onto",
         {"Q", "domain", "base", "classes", "object_properties", "data_properties"},
         "Given a question {Q} within the {domain} domain, please formulate a SPARQL query to "
         "retrieve the answer based on the provided Ontology schema. The namespace is {base}, "
         "and the classes are {classes}. The object properties between classes are "
         "{object_properties}, and the classes may also have data properties such as "
         "{data_properties}. Respond with only the SPARQL query."},

        {"query_kg",
         {"Q", "triplets"},
         "Given a question {Q} and the context information provided by the matched triplets "
         "from the knowledge graph {triplets}, please justify whether the provided information "
         "is sufficient to accurately answer the question. Respond with either \"Yes\" or "
         "\"No\" to provide your justification."},

        {"synthesize_onto",
         {"Q", "evidence"},
         "Answer the question using only the facts below.\nQuestion: {Q}\nFacts:\n{evidence}\n"
         "Answer concisely."},

        {"synthesize_kg",
         {"Q", "triplets"},
         "Answer the question using only the knowledge graph triplets below.\nQuestion: {Q}\n"
         "Triplets:\n{triplets}\nAnswer concisely."},

        {"synthesize_text",
         {"Q", "passages"},
         "Answer the question using only the passages below.\nQuestion: {Q}\nPassages:\n"
         "{passages}\nAnswer concisely."},
    };
    return templates;
}

}  // namespace polyrag
