#pragma once
// Per-layer multivariate Gaussian density models over the shared semantic
// space, and the pointwise divergence score that ranks KG phrases for
// promotion into the ontology.
//
// Full-covariance fits in raw embedding space are singular whenever
// points < dimension, so fitting projects onto leading principal components
// first and adds a ridge to the covariance.

#include <Eigen/Dense>
#include <vector>

#include "polyrag/embedding.hpp"

namespace polyrag {

struct GaussianModel {
    Vector mean;                  // in the reduced space (d')
    Eigen::MatrixXd covariance;   // d'×d' sample covariance, ridge not folded in
    Eigen::MatrixXd projection;   // d×d', orthonormal columns
    double ridge = 0.0;
    double log_norm = 0.0;        // -(d'/2)·log(2π) − ½·logdet(Σ+λI)
    Eigen::MatrixXd chol_lower;   // Cholesky factor of Σ+λI

    int raw_dim() const { return int(projection.rows()); }
    int reduced_dim() const { return int(projection.cols()); }
};

// Builds a model from explicit parameters (projection columns must be
// orthonormal); computes the cached factorization and normalizer.
GaussianModel make_gaussian_model(Vector mean, Eigen::MatrixXd covariance,
                                  Eigen::MatrixXd projection, double ridge);

// Orthonormal basis of the top-min(max_dim, n-1, d) principal components of
// the given points. Column signs are fixed deterministically.
Eigen::MatrixXd principal_components(const std::vector<Vector>& points, int max_dim);

// Fits mean and sample covariance of the points in their own PCA projection,
// then ridges the covariance. Requires >= 2 finite points and ridge > 0.
GaussianModel fit_gaussian(const std::vector<Vector>& points, double ridge, int max_dim);

// Same fit inside a caller-supplied projection so several layers can share
// one reduced space.
GaussianModel fit_gaussian_in_projection(const std::vector<Vector>& points,
                                         const Eigen::MatrixXd& projection, double ridge);

// log F(x) = log_norm − ½·(Pᵀx−μ)ᵀ(Σ+λI)⁻¹(Pᵀx−μ) for a raw-space point.
double log_density(const GaussianModel& model, const Vector& x);
// Same, for a point already expressed in the reduced space.
double log_density_reduced(const GaussianModel& model, const Vector& y);

// exp(log_density) with underflow clamped to the smallest positive normal
// double, so the divergence terms below stay finite.
double density(const GaussianModel& model, const Vector& x);

// Cross-coverage terms at a point: d_ref_excess = −F_a(x)·log F_b(x) grows
// where a has mass that b lacks.
double pointwise_divergence(const GaussianModel& a, const GaussianModel& b, const Vector& x);

// Priority to promote the phrase at x from the KG layer into the ontology:
// positive where the KG density exceeds the ontology's coverage, negative
// where the ontology already covers more. Antisymmetric in (o, k).
double priority_score(const GaussianModel& o_model, const GaussianModel& k_model,
                      const Vector& x);

}  // namespace polyrag
