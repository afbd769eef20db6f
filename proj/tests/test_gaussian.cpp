#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "polyrag/gaussian.hpp"
#include "polyrag/rng.hpp"

using namespace polyrag;

namespace {

std::vector<Vector> random_points(Rng& rng, size_t n, int dim, double spread = 1.0) {
    std::vector<Vector> pts;
    for (size_t i = 0; i < n; ++i) {
        Vector v(dim);
        for (int d = 0; d < dim; ++d) v[d] = spread * rng.normal();
        pts.push_back(std::move(v));
    }
    return pts;
}

// Two-pass closed-form mean and (unbiased) sample covariance in raw space.
std::pair<Vector, Eigen::MatrixXd> sample_moments(const std::vector<Vector>& pts) {
    const auto n = Eigen::Index(pts.size());
    const auto d = pts.front().size();
    Vector mean = Vector::Zero(d);
    for (const auto& p : pts) mean += p;
    mean /= double(n);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
    cov /= double(n - 1);
    return {mean, cov};
}

GaussianModel standard_normal_2d() {
    return make_gaussian_model(Vector::Zero(2), Eigen::MatrixXd::Identity(2, 2),
                               Eigen::MatrixXd::Identity(2, 2), 0.0);
}

}  // namespace

TEST_SUITE_BEGIN("gaussian");

TEST_CASE("two collinear points: mean projects correctly, rank bound hit") {
    std::vector<Vector> pts(2, Vector(2));
    pts[0] << 0, 0;
    pts[1] << 2, 0;
    GaussianModel m = fit_gaussian(pts, 1e-3, 8);
    CHECK(m.reduced_dim() == 1);  // min(8, n-1, d) = 1

    Vector raw_mean(2);
    raw_mean << 1, 0;
    // Projected mean equals the projection of the raw mean.
    Vector expected = m.projection.transpose() * raw_mean;
    CHECK(m.mean[0] == doctest::Approx(expected[0]).epsilon(1e-12));
    // Pull the mean back to raw space: projection is (1, 0) after sign fixing.
    Vector back = m.projection * m.mean;
    CHECK(back[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(back[1] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("three 2-D points match the closed-form moment oracle") {
    std::vector<Vector> pts(3, Vector(2));
    pts[0] << 0.3, -1.2;
    pts[1] << 1.7, 0.4;
    pts[2] << -0.6, 0.9;
    GaussianModel m = fit_gaussian(pts, 1e-6, 8);
    REQUIRE(m.reduced_dim() == 2);

    auto [mean, cov] = sample_moments(pts);
    Vector mean_reduced = m.projection.transpose() * mean;
    Eigen::MatrixXd cov_reduced = m.projection.transpose() * cov * m.projection;
    for (int i = 0; i < 2; ++i) {
        CHECK(m.mean[i] == doctest::Approx(mean_reduced[i]).epsilon(1e-9));
        for (int j = 0; j < 2; ++j)
            CHECK(m.covariance(i, j) == doctest::Approx(cov_reduced(i, j)).epsilon(1e-9));
    }
}

TEST_CASE("reduced dimension is min(max_dim, n-1, d)") {
    Rng rng(11);
    auto pts = random_points(rng, 5, 100);
    GaussianModel m = fit_gaussian(pts, 1e-4, 8);
    CHECK(m.reduced_dim() == 4);
    CHECK(m.raw_dim() == 100);
}

TEST_CASE("fit preconditions") {
    Rng rng(12);
    CHECK_THROWS_AS(fit_gaussian(random_points(rng, 1, 4), 1e-4, 4), UsageError);
    CHECK_THROWS_AS(fit_gaussian(random_points(rng, 4, 4), 0.0, 4), UsageError);
    auto pts = random_points(rng, 4, 4);
    pts[2][1] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(fit_gaussian(pts, 1e-4, 4), UsageError);
}

TEST_CASE("projection columns are orthonormal and covariance+ridge is positive definite") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        size_t n = 2 + rng.index(12);
        int d = 2 + int(rng.index(10));
        GaussianModel m = fit_gaussian(random_points(rng, n, d), 1e-4, 6);

        Eigen::MatrixXd gram = m.projection.transpose() * m.projection;
        CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols()))
                  .cwiseAbs()
                  .maxCoeff() < 1e-8);

        Eigen::MatrixXd effective = m.covariance;
        effective.diagonal().array() += m.ridge;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(effective);
        CHECK(eig.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("standard normal log densities are analytic") {
    GaussianModel m = standard_normal_2d();
    Vector origin = Vector::Zero(2);
    CHECK(log_density(m, origin) == doctest::Approx(-std::log(2 * M_PI)).epsilon(1e-12));
    Vector x(2);
    x << 1, 0;
    CHECK(log_density(m, x) == doctest::Approx(-std::log(2 * M_PI) - 0.5).epsilon(1e-12));
}

TEST_CASE("fitted density integrates to one under Monte Carlo in the reduced space") {
    Rng rng(99);
    auto pts = random_points(rng, 30, 5);
    GaussianModel m = fit_gaussian(pts, 1e-3, 2);
    REQUIRE(m.reduced_dim() == 2);

    Eigen::MatrixXd effective = m.covariance;
    effective.diagonal().array() += m.ridge;
    double sigma = std::sqrt(effective.diagonal().maxCoeff());
    double half = 8.0 * sigma;
    double volume = (2 * half) * (2 * half);

    const int samples = 400000;
    double sum = 0.0;
    for (int i = 0; i < samples; ++i) {
        Vector y(2);
        y[0] = m.mean[0] + rng.uniform(-half, half);
        y[1] = m.mean[1] + rng.uniform(-half, half);
        sum += std::exp(log_density_reduced(m, y));
    }
    double integral = volume * sum / samples;
    CHECK(integral == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("log density is maximized at the mean among fitted points") {
    Rng rng(100);
    for (int trial = 0; trial < 10; ++trial) {
        auto pts = random_points(rng, 8, 6);
        GaussianModel m = fit_gaussian(pts, 1e-4, 4);
        double at_mean = log_density_reduced(m, m.mean);
        for (const auto& p : pts)
            CHECK(at_mean >= log_density(m, p) - 1e-12);
    }
}

TEST_CASE("identical models give zero priority everywhere") {
    Rng rng(55);
    auto pts = random_points(rng, 10, 4);
    GaussianModel m = fit_gaussian(pts, 1e-4, 3);
    for (int i = 0; i < 20; ++i) {
        Vector x(4);
        for (int d = 0; d < 4; ++d) x[d] = rng.uniform(-3, 3);
        CHECK(priority_score(m, m, x) == 0.0);
    }
}

TEST_CASE("priority is antisymmetric in the two models") {
    Rng rng(56);
    for (int trial = 0; trial < 1000; ++trial) {
        auto o_pts = random_points(rng, 6, 4);
        auto k_pts = random_points(rng, 6, 4);
        GaussianModel o = fit_gaussian(o_pts, 1e-4, 3);
        GaussianModel k = fit_gaussian(k_pts, 1e-4, 3);
        Vector x(4);
        for (int d = 0; d < 4; ++d) x[d] = rng.uniform(-4, 4);
        double fwd = priority_score(o, k, x);
        double rev = priority_score(k, o, x);
        CHECK(std::abs(fwd + rev) <= 1e-12 * std::max(1.0, std::abs(fwd)));
    }
}

TEST_CASE("separated clusters: priority is positive at the KG-only center") {
    // O mass at the origin, K mass at (4, 0); both unit-ish covariance.
    Rng rng(57);
    std::vector<Vector> o_pts, k_pts;
    for (int i = 0; i < 40; ++i) {
        Vector a(2), b(2);
        a << 0.4 * rng.normal(), 0.4 * rng.normal();
        b << 4.0 + 0.4 * rng.normal(), 0.4 * rng.normal();
        o_pts.push_back(a);
        k_pts.push_back(b);
    }
    GaussianModel o = fit_gaussian_in_projection(o_pts, Eigen::MatrixXd::Identity(2, 2), 1e-4);
    GaussianModel k = fit_gaussian_in_projection(k_pts, Eigen::MatrixXd::Identity(2, 2), 1e-4);

    Vector k_center(2), o_center(2);
    k_center << 4, 0;
    o_center << 0, 0;
    double at_k = priority_score(o, k, k_center);
    double at_o = priority_score(o, k, o_center);
    CHECK(at_k > 0.0);
    CHECK(at_k > at_o);
    CHECK(at_o < 0.0);
}

TEST_CASE("density clamps exp underflow to the smallest positive normal") {
    GaussianModel m = standard_normal_2d();
    Vector far(2);
    far << 60, 0;  // exp(-1800) underflows
    CHECK(density(m, far) == std::numeric_limits<double>::min());
    CHECK(std::isfinite(priority_score(m, m, far)));
}

TEST_SUITE_END();
