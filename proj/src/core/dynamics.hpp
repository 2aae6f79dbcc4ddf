#pragma once

#include "agerates.hpp"
#include "evolution.hpp"
#include "spatial.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace epi {

/// Snapshot (t, S, I); column k of I is the infected density at age a_k.
struct State {
    double t = 0.0;
    Field S;
    AgeProfile I;
};

/// A fully specified initial value problem. The time step is the age step.
struct Scenario {
    Scenario(SpatialGrid grid, AgeGrid ages, RateSet rates, Field S0, AgeProfile I0,
             double T_end, int output_stride = 1);

    SpatialGrid grid;
    AgeGrid ages;
    RateSet rates;
    Field S0;
    AgeProfile I0;
    double T_end;
    int output_stride;

    double dt() const { return ages.da(); }
    int steps() const;
    State initial_state() const { return {0.0, S0, I0}; }
};

/// Per-step summary. The last four fields are the instantaneous rates entering
/// the L1 balance; mass_ledger integrates them in time.
struct StepRecord {
    double t = 0.0;
    double mass_S = 0.0;
    double mass_I = 0.0;
    double sup_S = 0.0;
    double renewal_norm = 0.0;  ///< L1 norm of I(t, 0, .)
    double logistic_gain = 0.0;
    double mortality_sink = 0.0;
    double aged_out = 0.0;
    double boundary_flux = 0.0;
};

struct Trajectory {
    std::vector<State> snapshots;
    std::vector<int> snapshot_steps;
    std::vector<StepRecord> summary;  ///< one record per time level, including t = 0
};

/// Node-wise int_0^{a_m} b(a, x) I(a, x) da.
Field infection_pressure(const AgeGrid& ages, const RateSet& rates, const AgeProfile& I);

/// Age-0 slice solving I_0 = S (w_0 b_0 I_0 + sum_{k>=1} w_k b_k I_k) node-wise.
/// Columns 1..Na of `I` must already hold the new time level; column 0 is ignored.
Field renewal_boundary(const Field& S_new, const AgeProfile& I, const AgeGrid& ages,
                       const RateSet& rates);

/// kappa1 (1 - S/kappa2) S - S pressure + recovery.
Field reaction(const Field& S, const Field& pressure, const Field& recovery, const RateSet& rates);

/// Time stepper for one scenario. Immutable after construction.
class Stepper {
public:
    explicit Stepper(const Scenario& scenario);

    /// Advances by one dt = da. Preserves nonnegativity exactly.
    void advance(State& state) const;
    State step(const State& state) const;

    StepRecord record(const State& state) const;

    const Scenario& scenario() const { return *scenario_; }
    const AgeEvolution& evolution() const { return evolution_; }

    /// Rate used for the logistic gain and its Patankar-weighted loss,
    /// (exp(kappa1 dt) - 1)/dt, which makes the pure logistic update exact.
    double logistic_rate() const { return logistic_rate_; }

private:
    const Scenario* scenario_;
    AgeEvolution evolution_;
    double logistic_rate_;
};

State step(const State& state, const Scenario& scenario);

using StepObserver = std::function<void(const State&, const StepRecord&)>;

/// Runs until t >= T_end. The observer, when given, sees every time level.
Trajectory simulate(const Scenario& scenario, const StepObserver& observer = {});

}  // namespace epi
