#include "spatial.hpp"

#include "errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <string>

namespace epi {

namespace {

void require_size(const SpatialGrid& grid, const Field& u, const char* what) {
    if (u.size() != grid.size()) {
        throw ConfigError(std::string(what) + ": field has " + std::to_string(u.size()) +
                          " values, grid has " + std::to_string(grid.size()) + " nodes");
    }
}

}  // namespace

SpatialGrid::SpatialGrid(double x_min, double x_max, int n, Boundary boundary)
    : x_min_(x_min), x_max_(x_max), n_(n), h_(0.0), boundary_(boundary) {
    if (!std::isfinite(x_min) || !std::isfinite(x_max)) {
        throw ConfigError("spatial grid: endpoints must be finite");
    }
    if (!(x_min < x_max)) {
        throw ConfigError("spatial grid: x_min must be less than x_max");
    }
    if (n < 3) {
        throw ConfigError("spatial grid: need at least 3 nodes, got " + std::to_string(n));
    }
    h_ = neumann() ? (x_max - x_min) / (n - 1) : (x_max - x_min) / (n + 1);
    weights_ = Field::Constant(n, h_);
    if (neumann()) {
        weights_(0) = 0.5 * h_;
        weights_(n - 1) = 0.5 * h_;
    }
}

SpatialGrid SpatialGrid::build(double x_min, double x_max, int n, int delta) {
    if (delta != 0 && delta != 1) {
        throw ConfigError("spatial grid: boundary flag delta must be 0 or 1, got " +
                          std::to_string(delta));
    }
    return SpatialGrid(x_min, x_max, n, delta == 1 ? Boundary::kNeumann : Boundary::kDirichlet);
}

double SpatialGrid::node(int i) const {
    return neumann() ? x_min_ + i * h_ : x_min_ + (i + 1) * h_;
}

Field SpatialGrid::nodes() const {
    Field x(n_);
    for (int i = 0; i < n_; ++i) x(i) = node(i);
    return x;
}

double SpatialGrid::integral(const Field& u) const {
    require_size(*this, u, "integral");
    return weights_.dot(u);
}

double SpatialGrid::inner(const Field& u, const Field& v) const {
    require_size(*this, u, "inner");
    require_size(*this, v, "inner");
    return (weights_.array() * u.array() * v.array()).sum();
}

double SpatialGrid::eigenvalue(int j) const {
    if (j < 0 || j >= n_) throw ConfigError("eigenvalue index out of range");
    const double pi = std::numbers::pi;
    const double s = neumann() ? std::sin(j * pi / (2.0 * (n_ - 1)))
                               : std::sin((j + 1) * pi / (2.0 * (n_ + 1)));
    return 4.0 / (h_ * h_) * s * s;
}

Field Tridiagonal::apply(const Field& u) const {
    const Eigen::Index n = diag.size();
    Field out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double v = diag(i) * u(i);
        if (i > 0) v += lower(i) * u(i - 1);
        if (i + 1 < n) v += upper(i) * u(i + 1);
        out(i) = v;
    }
    return out;
}

Field Tridiagonal::solve(const Field& rhs) const {
    const Eigen::Index n = diag.size();
    Eigen::VectorXd cp(n);
    Field x(n);
    double pivot = diag(0);
    if (std::abs(pivot) < 1e-300) throw NumericalError("tridiagonal solve: zero pivot");
    cp(0) = n > 1 ? upper(0) / pivot : 0.0;
    x(0) = rhs(0) / pivot;
    for (Eigen::Index i = 1; i < n; ++i) {
        pivot = diag(i) - lower(i) * cp(i - 1);
        if (std::abs(pivot) < 1e-300) throw NumericalError("tridiagonal solve: zero pivot");
        cp(i) = i + 1 < n ? upper(i) / pivot : 0.0;
        x(i) = (rhs(i) - lower(i) * x(i - 1)) / pivot;
    }
    for (Eigen::Index i = n - 2; i >= 0; --i) x(i) -= cp(i) * x(i + 1);
    return x;
}

Tridiagonal minus_laplacian(const SpatialGrid& grid, double coeff) {
    const int n = grid.size();
    const double s = coeff / (grid.h() * grid.h());
    Tridiagonal t{Eigen::VectorXd::Constant(n, -s), Eigen::VectorXd::Constant(n, 2.0 * s),
                  Eigen::VectorXd::Constant(n, -s)};
    t.lower(0) = 0.0;
    t.upper(n - 1) = 0.0;
    if (grid.neumann()) {
        t.upper(0) = -2.0 * s;
        t.lower(n - 1) = -2.0 * s;
    }
    return t;
}

Field apply_laplacian(const SpatialGrid& grid, const Field& u) {
    require_size(grid, u, "apply_laplacian");
    const int n = grid.size();
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    Field out(n);
    for (int i = 1; i + 1 < n; ++i) out(i) = (u(i - 1) - 2.0 * u(i) + u(i + 1)) * inv_h2;
    if (grid.neumann()) {
        out(0) = 2.0 * (u(1) - u(0)) * inv_h2;
        out(n - 1) = 2.0 * (u(n - 2) - u(n - 1)) * inv_h2;
    } else {
        out(0) = (u(1) - 2.0 * u(0)) * inv_h2;
        out(n - 1) = (u(n - 2) - 2.0 * u(n - 1)) * inv_h2;
    }
    return out;
}

Field solve_helmholtz(const SpatialGrid& grid, double alpha, const Field& rhs) {
    require_size(grid, rhs, "solve_helmholtz");
    const double mu0 = grid.smallest_eigenvalue();
    if (alpha + mu0 <= 1e-12 * std::max(1.0, std::abs(alpha))) {
        throw NumericalError("solve_helmholtz: alpha = " + std::to_string(alpha) +
                             " makes (alpha - Lap) singular or indefinite (mu_0 = " +
                             std::to_string(mu0) + ")");
    }
    Tridiagonal t = minus_laplacian(grid);
    t.diag.array() += alpha;
    return t.solve(rhs);
}

Field solve_shifted(const SpatialGrid& grid, const Field& alpha, const Field& rhs, double coeff) {
    require_size(grid, rhs, "solve_shifted");
    require_size(grid, alpha, "solve_shifted");
    Tridiagonal t = minus_laplacian(grid, coeff);
    t.diag += alpha;
    return t.solve(rhs);
}

std::vector<Eigenpair> laplacian_eigenpairs(const SpatialGrid& grid, int k) {
    const int n = grid.size();
    if (k < 1 || k > n) {
        throw ConfigError("laplacian_eigenpairs: k must lie in [1, " + std::to_string(n) + "]");
    }
    // W^{1/2} (-Lap) W^{-1/2} is symmetric for the trapezoid weights W.
    const Tridiagonal t = minus_laplacian(grid);
    const Eigen::VectorXd sqrt_w = grid.weights().array().sqrt();
    Eigen::VectorXd sub(n - 1);
    for (int i = 0; i + 1 < n; ++i) sub(i) = t.upper(i) * sqrt_w(i) / sqrt_w(i + 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(t.diag, sub, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("laplacian_eigenpairs: tridiagonal eigensolve failed");
    }
    std::vector<Eigenpair> pairs;
    pairs.reserve(k);
    for (int j = 0; j < k; ++j) {
        Field phi = solver.eigenvectors().col(j).array() / sqrt_w.array();
        if (phi(0) < 0.0) phi = -phi;
        pairs.push_back({solver.eigenvalues()(j), std::move(phi)});
    }
    return pairs;
}

}  // namespace epi
