#pragma once

#include "agerates.hpp"
#include "spatial.hpp"

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace epi {

/// Number of Crank-Nicolson substeps used to approximate e^{t Lap}. With
/// `positive` the substep obeys dt_sub <= h^2/2, which keeps every substep a
/// nonnegative matrix.
int heat_substeps(const SpatialGrid& grid, double t, bool positive = true);

/// Crank-Nicolson approximation of e^{t Lap_B} u.
Field heat_step(const SpatialGrid& grid, double t, const Field& u, bool positive = true);

/// Dense matrix of the substepped Crank-Nicolson heat flow over time tau.
class HeatPropagator {
public:
    HeatPropagator(const SpatialGrid& grid, double tau);

    double tau() const { return tau_; }
    int substeps() const { return substeps_; }
    const Eigen::MatrixXd& matrix() const { return matrix_; }

private:
    double tau_;
    int substeps_;
    Eigen::MatrixXd matrix_;
};

/// Thread-safe cache of heat propagators keyed by the exact value of tau.
class PropagatorCache {
public:
    explicit PropagatorCache(SpatialGrid grid) : grid_(std::move(grid)) {}

    std::shared_ptr<const HeatPropagator> get(double tau) const;
    std::size_t size() const;

private:
    SpatialGrid grid_;
    mutable std::mutex mutex_;
    mutable std::map<double, std::shared_ptr<const HeatPropagator>> entries_;
};

/// Discrete evolution operator U_A(a, sigma) of A(a) = d(a) Lap_B - m(a,.) - r(a,.).
///
/// Each age cell is advanced by Strang splitting: half decay with the rates at
/// the left node, heat flow over int d, half decay with the rates at the right
/// node. Node-aligned cells reuse propagators built at construction, so the
/// object is immutable afterwards and may be shared between threads.
class AgeEvolution {
public:
    AgeEvolution(const SpatialGrid& grid, const AgeGrid& ages, const RateSet& rates);

    const SpatialGrid& grid() const { return grid_; }
    const AgeGrid& ages() const { return ages_; }

    /// U_A(a_to, a_from) u for arbitrary 0 <= a_from <= a_to <= a_m.
    Field step(double a_from, double a_to, const Field& u) const;

    /// U_A(a_{k+1}, a_k) applied to `in`.
    Field advance_cell(int k, const Field& in) const;

    /// Advances every column k -> k+1 in place; column Na is dropped and column 0 is left untouched.
    void shift_profile(AgeProfile& profile) const;

    /// Dense matrix of U_A(a_{k+1}, a_k).
    Eigen::MatrixXd cell_matrix(int k) const;

    /// Dense matrices of U_A(a_k, 0) for every age node k.
    std::vector<Eigen::MatrixXd> transport_matrices() const;

private:
    Field advance_piece(double a_left, double a_right, const Field& in) const;
    double interpolate_loss(int i, double a) const;
    double interpolate_diffusion(double a) const;

    SpatialGrid grid_;
    AgeGrid ages_;
    Eigen::VectorXd d_;
    AgeProfile loss_;        // m + r
    AgeProfile half_decay_;  // exp(-(m + r) da / 2)
    PropagatorCache cache_;
    std::vector<std::shared_ptr<const HeatPropagator>> cell_propagators_;
};

Field evolution_step(const SpatialGrid& grid, const AgeGrid& ages, const RateSet& rates,
                     double a_from, double a_to, const Field& u);

}  // namespace epi
