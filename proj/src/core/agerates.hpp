#pragma once

#include "spatial.hpp"

#include <Eigen/Dense>

#include <functional>

namespace epi {

/// Uniform mesh a_k = k*da on [0, a_m] with trapezoid weights.
class AgeGrid {
public:
    AgeGrid(double a_max, int intervals);

    double a_max() const { return a_max_; }
    int intervals() const { return intervals_; }
    /// Number of age nodes, intervals() + 1.
    int size() const { return intervals_ + 1; }
    double da() const { return da_; }
    double node(int k) const { return k * da_; }
    const Eigen::VectorXd& nodes() const { return nodes_; }
    const Eigen::VectorXd& weights() const { return weights_; }

private:
    double a_max_;
    int intervals_;
    double da_;
    Eigen::VectorXd nodes_;
    Eigen::VectorXd weights_;
};

/// Age-by-space table: column k holds the spatial field at age node a_k.
using AgeProfile = Eigen::MatrixXd;

using AgeFunction = std::function<double(double)>;
using AgeSpaceFunction = std::function<double(double, double)>;

/// Model coefficients as callables. `homogeneous` declares that m, r and b
/// do not depend on x.
struct RateFunctions {
    double kappa1 = 1.0;
    double kappa2 = 1.0;
    AgeFunction d;
    AgeSpaceFunction m;
    AgeSpaceFunction r;
    AgeSpaceFunction b;
    bool homogeneous = true;

    static RateFunctions constant(double kappa1, double kappa2, double d, double m, double b,
                                  double r = 0.0);
};

/// Coefficients sampled once onto the (age x space) lattice. The tables are
/// what every operator uses; the callables are retained for reference
/// quadrature only.
///
/// Discontinuities of b in age should sit on age nodes, otherwise the
/// trapezoid rule loses its second order.
class RateSet {
public:
    RateSet(RateFunctions functions, const AgeGrid& ages, const SpatialGrid& grid,
            bool allow_zero_infection = false);

    double kappa1() const { return fns_.kappa1; }
    double kappa2() const { return fns_.kappa2; }
    const Eigen::VectorXd& d() const { return d_; }
    const AgeProfile& m() const { return m_; }
    const AgeProfile& r() const { return r_; }
    const AgeProfile& b() const { return b_; }

    bool homogeneous() const { return fns_.homogeneous; }
    bool recovery_free() const { return recovery_free_; }
    bool infection_free() const { return infection_free_; }
    double min_diffusion() const { return d_.minCoeff(); }

    int age_nodes() const { return static_cast<int>(d_.size()); }
    int space_nodes() const { return static_cast<int>(m_.rows()); }

    const RateFunctions& functions() const { return fns_; }

    /// Same rates with b multiplied by `factor`, resampled on the same lattice.
    RateSet with_infection_scaled(double factor, const AgeGrid& ages,
                                  const SpatialGrid& grid) const;

private:
    RateFunctions fns_;
    Eigen::VectorXd d_;
    AgeProfile m_;
    AgeProfile r_;
    AgeProfile b_;
    bool recovery_free_ = true;
    bool infection_free_ = false;
};

/// Trapezoid accumulation of int_0^{a_k} values(a) da at every node.
Eigen::VectorXd cumulative_integral(const AgeGrid& ages, const Eigen::VectorXd& values);

/// Pi(a_k) = exp(-int_0^{a_k} m) for an age-only mortality sampled at the nodes.
Eigen::VectorXd survival(const AgeGrid& ages, const Eigen::VectorXd& mortality);
Eigen::VectorXd survival(const AgeGrid& ages, const AgeFunction& mortality);

/// Node-wise sum_k w_k values(:, k).
Field age_integral(const AgeGrid& ages, const AgeProfile& values);

}  // namespace epi
