#pragma once
// PAM-style k-medoids: greedy build phase, then best-improvement swaps until
// no swap lowers the total in-cluster distance. Deterministic under a fixed
// seed (the seed only breaks exact cost ties).

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "polyrag/embedding.hpp"

namespace polyrag {

struct Clustering {
    struct Cluster {
        size_t medoid;                 // index into the input point set
        std::vector<size_t> members;   // includes the medoid
    };
    std::vector<Cluster> clusters;
    std::vector<size_t> assignment;    // point index -> cluster position
    double cost = 0.0;                 // sum of member-to-medoid distances
    std::vector<double> cost_trace;    // cost after init and after each swap
};

// Core algorithm over a precomputed symmetric distance matrix.
Clustering k_medoids(const Eigen::MatrixXd& distances, size_t k, uint64_t seed);

// Convenience overload using 1 − cosine as the distance.
Clustering k_medoids(const std::vector<Vector>& points, size_t k, uint64_t seed);

}  // namespace polyrag
