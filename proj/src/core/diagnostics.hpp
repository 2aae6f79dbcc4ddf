#pragma once

#include "dynamics.hpp"
#include "steadystate.hpp"

#include <vector>

namespace epi {

/// Time-integrated L1 balance. Entry i refers to summary record i.
struct MassLedger {
    std::vector<double> t;
    std::vector<double> total_mass;
    double initial_mass = 0.0;
    std::vector<double> logistic_gain_integral;
    std::vector<double> mortality_sink_integral;
    std::vector<double> aged_out_term;
    std::vector<double> boundary_flux_term;
    /// total - initial - gain + mortality + aged_out; the boundary flux is not included.
    std::vector<double> residual;

    double max_abs_residual() const;
    double max_residual() const;
};

MassLedger mass_ledger(const Trajectory& trajectory, const Scenario& scenario);

/// Solution of z' = kappa1 (1 - z/kappa2) z with z(0) = S0_sup.
double logistic_envelope(double S0_sup, double kappa1, double kappa2, double t);

struct PositivityReport {
    bool pass = true;
    double min_value = 0.0;
    int clipped = 0;
};

/// Entries in [-1e-12, 0) are set to 0 and counted; anything lower fails.
PositivityReport positivity_check(State& state);
PositivityReport positivity_check(const State& state);

/// ||S - S*||_{L1} + ||I - I*||_{L1(J x Omega)} per snapshot.
std::vector<double> convergence_metric(const Trajectory& trajectory, const SteadyState& target,
                                       const SpatialGrid& grid, const AgeGrid& ages);

/// Right-hand side of the a-priori L1 estimate at time t.
double l1_bound(const Scenario& scenario, double t);

}  // namespace epi
