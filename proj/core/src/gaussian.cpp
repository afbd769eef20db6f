#include "polyrag/gaussian.hpp"

#include <cmath>
#include <limits>

namespace polyrag {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2π)

void check_points(const std::vector<Vector>& points, size_t minimum) {
    if (points.size() < minimum)
        throw UsageError("gaussian fit: need at least " + std::to_string(minimum) +
                         " points, got " + std::to_string(points.size()));
    const auto dim = points.front().size();
    for (const auto& p : points) {
        if (p.size() != dim) throw UsageError("gaussian fit: mixed point dimensions");
        if (!p.allFinite()) throw UsageError("gaussian fit: non-finite input point");
    }
}

Eigen::MatrixXd centered_data(const std::vector<Vector>& points) {
    const auto n = Eigen::Index(points.size());
    const auto d = points.front().size();
    Vector mean = Vector::Zero(d);
    for (const auto& p : points) mean += p;
    mean /= double(n);
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) x.row(i) = (points[size_t(i)] - mean).transpose();
    return x;
}

// Largest-magnitude entry of each column made positive so the basis does not
// depend on SVD sign conventions.
void fix_column_signs(Eigen::MatrixXd& basis) {
    for (Eigen::Index c = 0; c < basis.cols(); ++c) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index r = 0; r < basis.rows(); ++r) {
            double a = std::abs(basis(r, c));
            if (a > best + 1e-15) {
                best = a;
                arg = r;
            }
        }
        if (basis(arg, c) < 0.0) basis.col(c) = -basis.col(c);
    }
}

}  // namespace

GaussianModel make_gaussian_model(Vector mean, Eigen::MatrixXd covariance,
                                  Eigen::MatrixXd projection, double ridge) {
    if (ridge < 0.0) throw UsageError("gaussian model: ridge must be non-negative");
    if (covariance.rows() != covariance.cols() || covariance.rows() != mean.size() ||
        projection.cols() != mean.size())
        throw UsageError("gaussian model: inconsistent shapes");
    Eigen::MatrixXd gram = projection.transpose() * projection;
    gram.diagonal().array() -= 1.0;
    if (gram.cwiseAbs().maxCoeff() > 1e-8)
        throw UsageError("gaussian model: projection columns are not orthonormal");

    GaussianModel m;
    m.mean = std::move(mean);
    m.covariance = std::move(covariance);
    m.projection = std::move(projection);
    m.ridge = ridge;

    Eigen::MatrixXd effective = m.covariance;
    effective.diagonal().array() += m.ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(effective);
    if (llt.info() != Eigen::Success)
        throw UsageError("gaussian model: covariance + ridge is not positive definite");
    m.chol_lower = llt.matrixL();

    double half_logdet = 0.0;
    for (Eigen::Index i = 0; i < m.chol_lower.rows(); ++i)
        half_logdet += std::log(m.chol_lower(i, i));
    m.log_norm = -0.5 * double(m.mean.size()) * kLog2Pi - half_logdet;
    return m;
}

Eigen::MatrixXd principal_components(const std::vector<Vector>& points, int max_dim) {
    check_points(points, 2);
    if (max_dim < 1) throw UsageError("principal_components: max_dim must be >= 1");
    const auto n = Eigen::Index(points.size());
    const auto d = points.front().size();
    const Eigen::Index reduced = std::min<Eigen::Index>({Eigen::Index(max_dim), n - 1, d});

    Eigen::MatrixXd x = centered_data(points);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    Eigen::MatrixXd basis = svd.matrixV().leftCols(reduced);
    fix_column_signs(basis);
    return basis;
}

GaussianModel fit_gaussian_in_projection(const std::vector<Vector>& points,
                                         const Eigen::MatrixXd& projection, double ridge) {
    check_points(points, 2);
    if (ridge <= 0.0) throw UsageError("gaussian fit: ridge must be > 0");
    if (points.front().size() != projection.rows())
        throw UsageError("gaussian fit: projection rows do not match point dimension");

    const auto n = Eigen::Index(points.size());
    const auto reduced = projection.cols();
    Eigen::MatrixXd y(n, reduced);
    for (Eigen::Index i = 0; i < n; ++i)
        y.row(i) = (projection.transpose() * points[size_t(i)]).transpose();

    Vector mean = y.colwise().mean().transpose();
    Eigen::MatrixXd centered = y.rowwise() - mean.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered / double(n - 1);
    cov = 0.5 * (cov + cov.transpose());  // keep exactly symmetric

    return make_gaussian_model(std::move(mean), std::move(cov), projection, ridge);
}

GaussianModel fit_gaussian(const std::vector<Vector>& points, double ridge, int max_dim) {
    return fit_gaussian_in_projection(points, principal_components(points, max_dim), ridge);
}

double log_density_reduced(const GaussianModel& model, const Vector& y) {
    if (y.size() != model.mean.size())
        throw UsageError("log_density: reduced point has wrong dimension");
    Vector z = y - model.mean;
    Vector w = model.chol_lower.triangularView<Eigen::Lower>().solve(z);
    return model.log_norm - 0.5 * w.squaredNorm();
}

double log_density(const GaussianModel& model, const Vector& x) {
    if (x.size() != model.projection.rows())
        throw UsageError("log_density: point has dimension " + std::to_string(x.size()) +
                         ", model raw dimension is " + std::to_string(model.projection.rows()));
    return log_density_reduced(model, model.projection.transpose() * x);
}

double density(const GaussianModel& model, const Vector& x) {
    double f = std::exp(log_density(model, x));
    if (f < std::numeric_limits<double>::min()) return std::numeric_limits<double>::min();
    if (std::isinf(f)) return std::numeric_limits<double>::max();
    return f;
}

double pointwise_divergence(const GaussianModel& a, const GaussianModel& b, const Vector& x) {
    return -density(a, x) * log_density(b, x);
}

double priority_score(const GaussianModel& o_model, const GaussianModel& k_model,
                      const Vector& x) {
    double log_fo = log_density(o_model, x);
    double log_fk = log_density(k_model, x);
    double fo = std::max(std::exp(log_fo), std::numeric_limits<double>::min());
    double fk = std::max(std::exp(log_fk), std::numeric_limits<double>::min());
    double o_excess = -fo * log_fk;  // ontology mass where the KG is thin
    double k_excess = -fk * log_fo;  // KG mass where the ontology is thin
    return k_excess - o_excess;
}

}  // namespace polyrag
