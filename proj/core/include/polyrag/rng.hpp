#pragma once
// Deterministic PRNG helpers. Everything seeded flows through splitmix64 so
// results are identical across platforms and standard-library versions.

#include <cstdint>
#include <vector>

namespace polyrag {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Stateless mix of a seed and a stream position.
inline uint64_t mix64(uint64_t seed, uint64_t stream) {
    uint64_t s = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    return splitmix64(s);
}

// Uniform double in [0, 1).
inline double to_unit_double(uint64_t bits) {
    return double(bits >> 11) * 0x1.0p-53;
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next() { return splitmix64(state_); }
    double uniform() { return to_unit_double(next()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Unbiased-enough index draw for test-scale ranges.
    size_t index(size_t n) { return size_t(next() % n); }
    // Standard normal via Box-Muller; fully specified arithmetic.
    double normal();

    std::vector<size_t> permutation(size_t n);

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace polyrag
