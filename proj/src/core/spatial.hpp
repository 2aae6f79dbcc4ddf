#pragma once

#include <Eigen/Dense>

#include <vector>

namespace epi {

/// Nodal values on a SpatialGrid.
using Field = Eigen::VectorXd;

enum class Boundary : int { kDirichlet = 0, kNeumann = 1 };

/// Uniform 1-D mesh on [x_min, x_max].
///
/// Dirichlet grids carry only the n interior nodes (boundary values are 0 and
/// eliminated); Neumann grids carry all n nodes including both endpoints and
/// close the stencil with a reflected ghost node.
class SpatialGrid {
public:
    SpatialGrid(double x_min, double x_max, int n, Boundary boundary);

    /// `delta` follows the boundary flag convention: 0 = Dirichlet, 1 = Neumann.
    static SpatialGrid build(double x_min, double x_max, int n, int delta);

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    double length() const { return x_max_ - x_min_; }
    int size() const { return n_; }
    double h() const { return h_; }
    Boundary boundary() const { return boundary_; }
    int delta() const { return boundary_ == Boundary::kNeumann ? 1 : 0; }
    bool neumann() const { return boundary_ == Boundary::kNeumann; }

    double node(int i) const;
    Field nodes() const;

    /// Quadrature weights of the discrete L2 inner product (h, halved at Neumann endpoints).
    const Field& weights() const { return weights_; }

    Field constant(double value) const { return Field::Constant(n_, value); }
    double integral(const Field& u) const;
    double inner(const Field& u, const Field& v) const;

    /// Smallest eigenvalue of the discrete -Lap (closed form of the 3-point stencil).
    double smallest_eigenvalue() const { return eigenvalue(0); }
    /// j-th eigenvalue of the discrete -Lap in ascending order (closed form).
    double eigenvalue(int j) const;

private:
    double x_min_;
    double x_max_;
    int n_;
    double h_;
    Boundary boundary_;
    Field weights_;
};

/// Tridiagonal matrix stored by diagonals; lower(0) and upper(n-1) are unused.
struct Tridiagonal {
    Eigen::VectorXd lower;
    Eigen::VectorXd diag;
    Eigen::VectorXd upper;

    Field apply(const Field& u) const;
    /// Thomas algorithm without pivoting; throws NumericalError on a vanishing pivot.
    Field solve(const Field& rhs) const;
};

/// Matrix of -coeff * Lap_B on the grid.
Tridiagonal minus_laplacian(const SpatialGrid& grid, double coeff = 1.0);

Field apply_laplacian(const SpatialGrid& grid, const Field& u);

/// Solves (alpha Id - Lap_B) u = rhs. Requires alpha > -mu_0^h.
Field solve_helmholtz(const SpatialGrid& grid, double alpha, const Field& rhs);

/// Solves (diag(alpha) - coeff Lap_B) u = rhs for a node-wise shift.
Field solve_shifted(const SpatialGrid& grid, const Field& alpha, const Field& rhs,
                    double coeff = 1.0);

struct Eigenpair {
    double mu;
    Field phi;
};

/// The k smallest eigenpairs of -Lap_B, ascending, with phi orthonormal in the
/// grid's weighted inner product and oriented so that phi(0) > 0.
std::vector<Eigenpair> laplacian_eigenpairs(const SpatialGrid& grid, int k);

}  // namespace epi
