#include "polyrag/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "polyrag/rng.hpp"

namespace polyrag {

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

std::vector<size_t> Rng::permutation(size_t n) {
    std::vector<size_t> p(n);
    for (size_t i = 0; i < n; ++i) p[i] = i;
    for (size_t i = n; i > 1; --i) {
        size_t j = index(i);
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

double cosine(const Vector& u, const Vector& v) {
    if (u.size() != v.size())
        throw UsageError("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()) + ")");
    double nu = u.norm();
    double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) throw UsageError("cosine: zero vector");
    double c = u.dot(v) / (nu * nv);
    return std::clamp(c, -1.0, 1.0);
}

std::vector<Vector> EmbeddingProvider::embed_batch(const std::vector<std::string>& texts) {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
}

namespace {

constexpr size_t kFeatureBuckets = 4096;

uint64_t fnv1a64(const char* data, size_t n) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < n; ++i) {
        h ^= uint8_t(data[i]);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string normalize_text(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(char(std::tolower(c)));
    }
    return out;
}

}  // namespace

LocalHashEmbedder::LocalHashEmbedder(int dim, uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim <= 0) throw ConfigError("embedding dimension must be positive");
}

std::string LocalHashEmbedder::id() const {
    return "local-hash-3gram/d" + std::to_string(dim_) + "/s" + std::to_string(seed_);
}

Vector LocalHashEmbedder::embed(const std::string& text) {
    std::string norm = normalize_text(text);
    if (norm.empty()) throw UsageError("embed: text is empty");
    std::string padded = " " + norm + " ";

    // Sparse 3-gram counts.
    std::map<size_t, double> weights;
    for (size_t i = 0; i + 3 <= padded.size(); ++i)
        weights[fnv1a64(padded.data() + i, 3) % kFeatureBuckets] += 1.0;

    Vector v = Vector::Zero(dim_);
    for (const auto& [bucket, w] : weights) {
        for (int d = 0; d < dim_; ++d) {
            uint64_t bits = mix64(seed_, uint64_t(bucket) * 0x10000ULL + uint64_t(d));
            v[d] += w * (2.0 * to_unit_double(bits) - 1.0);
        }
    }
    double n = v.norm();
    if (n > 0.0) v /= n;
    return v;
}

void VectorIndex::insert(const std::string& id, Vector v) {
    if (dim_ < 0) dim_ = int(v.size());
    if (int(v.size()) != dim_)
        throw UsageError("index: vector for '" + id + "' has dimension " +
                         std::to_string(v.size()) + ", expected " + std::to_string(dim_));
    if (!v.allFinite()) throw UsageError("index: vector for '" + id + "' has non-finite entries");
    items_[id] = std::move(v);
}

const Vector* VectorIndex::find(const std::string& id) const {
    auto it = items_.find(id);
    return it == items_.end() ? nullptr : &it->second;
}

std::vector<ScoredId> VectorIndex::top_k(const Vector& query, size_t k) const {
    if (k < 1) throw UsageError("top_k: k must be >= 1");
    std::vector<ScoredId> scored;
    scored.reserve(items_.size());
    for (const auto& [id, v] : items_) scored.push_back({id, cosine(query, v)});
    std::sort(scored.begin(), scored.end(), [](const ScoredId& a, const ScoredId& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

}  // namespace polyrag
