#pragma once
// Embedding providers, cosine similarity, and the exact top-k vector index.
// The corpus scale permits exhaustive scans; there is deliberately no
// approximate-nearest-neighbor structure here.

#include <Eigen/Core>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "polyrag/error.hpp"

namespace polyrag {

using Vector = Eigen::VectorXd;

// u·v / (‖u‖‖v‖); throws on dimension mismatch or a zero vector.
double cosine(const Vector& u, const Vector& v);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string id() const = 0;
    virtual int dim() const = 0;
    // Rejects empty text; the returned vector has exactly dim() entries.
    virtual Vector embed(const std::string& text) = 0;
    virtual std::vector<Vector> embed_batch(const std::vector<std::string>& texts);
};

// Offline deterministic embedder: hashed character-3-gram counts pushed
// through a seeded random projection, then L2-normalized. Identical input
// gives bitwise-identical output on every platform.
class LocalHashEmbedder : public EmbeddingProvider {
public:
    explicit LocalHashEmbedder(int dim = 64, uint64_t seed = 42);

    std::string id() const override;
    int dim() const override { return dim_; }
    Vector embed(const std::string& text) override;

private:
    int dim_;
    uint64_t seed_;
};

struct ScoredId {
    std::string id;
    double score;

    bool operator==(const ScoredId&) const = default;
};

// Exact cosine top-k over an id -> vector map.
class VectorIndex {
public:
    void insert(const std::string& id, Vector v);
    size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    const Vector* find(const std::string& id) const;

    // k highest-cosine items, ties broken by ascending id; fewer than k
    // results when the index is smaller. k must be >= 1.
    std::vector<ScoredId> top_k(const Vector& query, size_t k) const;

private:
    std::map<std::string, Vector> items_;  // ordered for deterministic scans
    int dim_ = -1;
};

enum class LayerTag { Ontology, Kg };

// A subject+relation phrase lifted into the shared semantic space.
struct PhrasePoint {
    std::string phrase;
    Vector vector;
    LayerTag origin = LayerTag::Ontology;
    std::string source_ref;  // originating (class, property) pair or triplet id
    int multiplicity = 1;
};

}  // namespace polyrag
