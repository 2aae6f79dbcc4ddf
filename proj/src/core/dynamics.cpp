#include "dynamics.hpp"

#include "errors.hpp"

#include <cmath>
#include <sstream>

namespace epi {

Scenario::Scenario(SpatialGrid grid_, AgeGrid ages_, RateSet rates_, Field S0_, AgeProfile I0_,
                   double T_end_, int output_stride_)
    : grid(std::move(grid_)),
      ages(std::move(ages_)),
      rates(std::move(rates_)),
      S0(std::move(S0_)),
      I0(std::move(I0_)),
      T_end(T_end_),
      output_stride(output_stride_) {
    if (rates.age_nodes() != ages.size() || rates.space_nodes() != grid.size()) {
        throw ConfigError("scenario: rate tables do not match the grids");
    }
    if (S0.size() != grid.size()) throw ConfigError("scenario: S0 has the wrong length");
    if (I0.rows() != grid.size() || I0.cols() != ages.size()) {
        throw ConfigError("scenario: I0 must have one slice per age node");
    }
    if (!S0.allFinite() || !I0.allFinite() || S0.minCoeff() < 0.0 || I0.minCoeff() < 0.0) {
        throw ConfigError("scenario: initial data must be finite and nonnegative");
    }
    if (!(T_end >= 0.0) || !std::isfinite(T_end)) {
        throw ConfigError("scenario: T_end must be nonnegative");
    }
    if (output_stride < 1) throw ConfigError("scenario: output_stride must be >= 1");
}

int Scenario::steps() const {
    return static_cast<int>(std::ceil(T_end / dt() - 1e-9));
}

Field infection_pressure(const AgeGrid& ages, const RateSet& rates, const AgeProfile& I) {
    if (I.cols() != ages.size() || I.rows() != rates.space_nodes()) {
        throw ConfigError("infection_pressure: I does not match the age/space lattice");
    }
    return age_integral(ages, rates.b().cwiseProduct(I));
}

Field renewal_boundary(const Field& S_new, const AgeProfile& I, const AgeGrid& ages,
                       const RateSet& rates) {
    if (I.cols() != ages.size() || I.rows() != S_new.size()) {
        throw ConfigError("renewal_boundary: I does not match the age/space lattice");
    }
    const Eigen::VectorXd& w = ages.weights();
    const AgeProfile& b = rates.b();
    const Eigen::Index n = S_new.size();
    const Eigen::Index na = ages.size();
    Field out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double partial = 0.0;
        for (Eigen::Index k = 1; k < na; ++k) partial += w(k) * b(i, k) * I(i, k);
        const double denom = 1.0 - S_new(i) * w(0) * b(i, 0);
        if (!(denom > 0.0)) {
            std::ostringstream msg;
            msg << "renewal boundary: 1 - S w0 b0 = " << denom << " at node " << i
                << "; refine the age mesh";
            throw NumericalError(msg.str());
        }
        out(i) = S_new(i) * partial / denom;
    }
    return out;
}

Field reaction(const Field& S, const Field& pressure, const Field& recovery,
               const RateSet& rates) {
    const double k1 = rates.kappa1();
    const double k2 = rates.kappa2();
    return (k1 * (1.0 - S.array() / k2) * S.array() - S.array() * pressure.array() +
            recovery.array())
        .matrix();
}

Stepper::Stepper(const Scenario& scenario)
    : scenario_(&scenario),
      evolution_(scenario.grid, scenario.ages, scenario.rates),
      logistic_rate_(std::expm1(scenario.rates.kappa1() * scenario.dt()) / scenario.dt()) {}

void Stepper::advance(State& state) const {
    const Scenario& sc = *scenario_;
    const double dt = sc.dt();
    const double k2 = sc.rates.kappa2();

    const Field pressure = infection_pressure(sc.ages, sc.rates, state.I);
    const Field recovery = age_integral(sc.ages, sc.rates.r().cwiseProduct(state.I));

    evolution_.shift_profile(state.I);

    const Field alpha = (1.0 / dt + logistic_rate_ * state.S.array() / k2 + pressure.array()).matrix();
    const Field rhs = (state.S.array() * (1.0 / dt + logistic_rate_) + recovery.array()).matrix();
    state.S = solve_shifted(sc.grid, alpha, rhs);

    state.I.col(0) = renewal_boundary(state.S, state.I, sc.ages, sc.rates);
    state.t += dt;

    if (!state.S.allFinite() || !state.I.allFinite()) {
        std::ostringstream msg;
        msg << "simulation produced a non-finite value at t = " << state.t;
        throw NumericalError(msg.str());
    }
}

State Stepper::step(const State& state) const {
    State next = state;
    advance(next);
    return next;
}

StepRecord Stepper::record(const State& state) const {
    const Scenario& sc = *scenario_;
    const SpatialGrid& g = sc.grid;
    const Eigen::VectorXd& wx = g.weights();
    const Eigen::VectorXd& wa = sc.ages.weights();
    const double k1 = sc.rates.kappa1();
    const double k2 = sc.rates.kappa2();

    StepRecord rec;
    rec.t = state.t;
    rec.mass_S = wx.dot(state.S);
    const Eigen::VectorXd slice_mass = state.I.transpose() * wx;
    rec.mass_I = wa.dot(slice_mass);
    rec.sup_S = state.S.maxCoeff();
    rec.renewal_norm = slice_mass(0);
    rec.logistic_gain = (wx.array() * k1 * (1.0 - state.S.array() / k2) * state.S.array()).sum();
    const Eigen::VectorXd slice_loss = sc.rates.m().cwiseProduct(state.I).transpose() * wx;
    rec.mortality_sink = wa.dot(slice_loss);
    rec.aged_out = slice_mass(sc.ages.intervals());
    double flux = wx.dot(apply_laplacian(g, state.S));
    for (int k = 0; k < sc.ages.size(); ++k) {
        flux += wa(k) * sc.rates.d()(k) * wx.dot(apply_laplacian(g, state.I.col(k)));
    }
    rec.boundary_flux = flux;
    return rec;
}

State step(const State& state, const Scenario& scenario) {
    return Stepper(scenario).step(state);
}

Trajectory simulate(const Scenario& scenario, const StepObserver& observer) {
    const Stepper stepper(scenario);
    const int steps = scenario.steps();
    Trajectory traj;
    traj.summary.reserve(steps + 1);

    State state = scenario.initial_state();
    auto visit = [&](int k) {
        traj.summary.push_back(stepper.record(state));
        if (k % scenario.output_stride == 0 || k == steps) {
            traj.snapshots.push_back(state);
            traj.snapshot_steps.push_back(k);
        }
        if (observer) observer(state, traj.summary.back());
    };
    visit(0);
    for (int k = 1; k <= steps; ++k) {
        stepper.advance(state);
        state.t = k * scenario.dt();
        visit(k);
    }
    return traj;
}

}  // namespace epi
