#include "polyrag/kmedoids.hpp"

#include <algorithm>
#include <limits>

#include "polyrag/rng.hpp"

namespace polyrag {

namespace {

double total_cost(const Eigen::MatrixXd& d, const std::vector<size_t>& medoids) {
    double cost = 0.0;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (size_t m : medoids) best = std::min(best, d(i, Eigen::Index(m)));
        cost += best;
    }
    return cost;
}

}  // namespace

Clustering k_medoids(const Eigen::MatrixXd& d, size_t k, uint64_t seed) {
    const size_t n = size_t(d.rows());
    if (d.rows() != d.cols()) throw UsageError("k_medoids: distance matrix must be square");
    if (k < 1 || k > n)
        throw UsageError("k_medoids: k=" + std::to_string(k) + " out of range for " +
                         std::to_string(n) + " points");

    // Tie-break order is a seeded permutation so equal-cost choices are
    // stable under a fixed seed.
    Rng rng(seed);
    std::vector<size_t> tiebreak_of(n);
    {
        auto perm = rng.permutation(n);
        for (size_t rank = 0; rank < n; ++rank) tiebreak_of[perm[rank]] = rank;
    }
    auto prefer = [&](double cost_a, size_t a, double cost_b, size_t b) {
        if (cost_a != cost_b) return cost_a < cost_b;
        return tiebreak_of[a] < tiebreak_of[b];
    };

    // Greedy build: each step adds the point that lowers total cost most.
    auto greedy_init = [&]() {
        std::vector<size_t> medoids;
        std::vector<char> is_medoid(n, 0);
        std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
        while (medoids.size() < k) {
            bool have = false;
            size_t best_pt = 0;
            double best_cost = 0.0;
            for (size_t cand = 0; cand < n; ++cand) {
                if (is_medoid[cand]) continue;
                double cost = 0.0;
                for (size_t i = 0; i < n; ++i)
                    cost += std::min(nearest[i], d(Eigen::Index(i), Eigen::Index(cand)));
                if (!have || prefer(cost, cand, best_cost, best_pt)) {
                    have = true;
                    best_pt = cand;
                    best_cost = cost;
                }
            }
            medoids.push_back(best_pt);
            is_medoid[best_pt] = 1;
            for (size_t i = 0; i < n; ++i)
                nearest[i] = std::min(nearest[i], d(Eigen::Index(i), Eigen::Index(best_pt)));
        }
        return medoids;
    };

    // Swap phase: apply the best strictly-improving (medoid, candidate) swap
    // until none exists. Cost strictly decreases, so this terminates.
    auto swap_to_convergence = [&](std::vector<size_t> medoids,
                                   std::vector<double>& trace) {
        std::vector<char> is_medoid(n, 0);
        for (size_t m : medoids) is_medoid[m] = 1;
        double cost = total_cost(d, medoids);
        trace.push_back(cost);
        for (;;) {
            bool improved = false;
            size_t best_mi = 0, best_h = 0;
            double best_cost = cost;
            for (size_t mi = 0; mi < medoids.size(); ++mi) {
                for (size_t h = 0; h < n; ++h) {
                    if (is_medoid[h]) continue;
                    std::vector<size_t> trial = medoids;
                    trial[mi] = h;
                    double trial_cost = total_cost(d, trial);
                    bool better = trial_cost < best_cost;
                    bool tie =
                        improved && trial_cost == best_cost &&
                        std::pair(tiebreak_of[medoids[mi]], tiebreak_of[h]) <
                            std::pair(tiebreak_of[medoids[best_mi]], tiebreak_of[best_h]);
                    if (better || tie) {
                        improved = true;
                        best_mi = mi;
                        best_h = h;
                        best_cost = trial_cost;
                    }
                }
            }
            if (!improved) break;
            is_medoid[medoids[best_mi]] = 0;
            medoids[best_mi] = best_h;
            is_medoid[best_h] = 1;
            cost = best_cost;
            trace.push_back(cost);
        }
        return std::pair(std::move(medoids), cost);
    };

    // Best-improvement swaps can still stall in a local optimum, so the
    // greedy start is followed by seeded random restarts; the cheapest
    // converged run wins. The greedy run bounds the final cost from above.
    size_t restarts = std::min<size_t>(n, 12);
    std::vector<size_t> medoids;
    double cost = std::numeric_limits<double>::infinity();
    Clustering result;
    for (size_t attempt = 0; attempt <= restarts; ++attempt) {
        std::vector<size_t> init;
        if (attempt == 0) {
            init = greedy_init();
        } else {
            auto perm = rng.permutation(n);
            init.assign(perm.begin(), perm.begin() + long(k));
        }
        std::vector<double> trace;
        auto [converged, converged_cost] = swap_to_convergence(std::move(init), trace);
        if (converged_cost < cost) {
            cost = converged_cost;
            medoids = std::move(converged);
            result.cost_trace = std::move(trace);
        }
    }

    std::vector<char> is_medoid(n, 0);
    for (size_t m : medoids) is_medoid[m] = 1;
    std::sort(medoids.begin(), medoids.end());
    result.clusters.resize(medoids.size());
    result.assignment.assign(n, 0);
    for (size_t c = 0; c < medoids.size(); ++c) result.clusters[c].medoid = medoids[c];
    for (size_t i = 0; i < n; ++i) {
        size_t best_c = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (size_t c = 0; c < medoids.size(); ++c) {
            double dist = d(Eigen::Index(i), Eigen::Index(medoids[c]));
            // Points tie toward their own cluster first, then the lowest index.
            if (dist < best_d || (dist == best_d && medoids[c] == i)) {
                best_d = dist;
                best_c = c;
            }
        }
        result.assignment[i] = best_c;
        result.clusters[best_c].members.push_back(i);
    }
    result.cost = cost;
    return result;
}

Clustering k_medoids(const std::vector<Vector>& points, size_t k, uint64_t seed) {
    const size_t n = points.size();
    if (n == 0) throw UsageError("k_medoids: no points");
    Eigen::MatrixXd d(n, n);
    for (size_t i = 0; i < n; ++i) {
        d(Eigen::Index(i), Eigen::Index(i)) = 0.0;
        for (size_t j = i + 1; j < n; ++j) {
            double dist = 1.0 - cosine(points[i], points[j]);
            d(Eigen::Index(i), Eigen::Index(j)) = dist;
            d(Eigen::Index(j), Eigen::Index(i)) = dist;
        }
    }
    return k_medoids(d, k, seed);
}

}  // namespace polyrag
