#include "diagnostics.hpp"

#include "errors.hpp"

#include <algorithm>
#include <cmath>

namespace epi {

double MassLedger::max_abs_residual() const {
    double out = 0.0;
    for (double r : residual) out = std::max(out, std::abs(r));
    return out;
}

double MassLedger::max_residual() const {
    double out = -std::numeric_limits<double>::infinity();
    for (double r : residual) out = std::max(out, r);
    return residual.empty() ? 0.0 : out;
}

MassLedger mass_ledger(const Trajectory& trajectory, const Scenario& scenario) {
    MassLedger ledger;
    const std::vector<StepRecord>& rec = trajectory.summary;
    if (rec.empty()) return ledger;
    if (static_cast<int>(rec.size()) != scenario.steps() + 1) {
        throw ConfigError("mass_ledger: trajectory must carry one summary per step");
    }
    ledger.initial_mass = rec[0].mass_S + rec[0].mass_I;
    double gain = 0.0, sink = 0.0, aged = 0.0, flux = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        if (i > 0) {
            const double dt = rec[i].t - rec[i - 1].t;
            gain += 0.5 * dt * (rec[i].logistic_gain + rec[i - 1].logistic_gain);
            sink += 0.5 * dt * (rec[i].mortality_sink + rec[i - 1].mortality_sink);
            aged += 0.5 * dt * (rec[i].aged_out + rec[i - 1].aged_out);
            flux += 0.5 * dt * (rec[i].boundary_flux + rec[i - 1].boundary_flux);
        }
        const double total = rec[i].mass_S + rec[i].mass_I;
        ledger.t.push_back(rec[i].t);
        ledger.total_mass.push_back(total);
        ledger.logistic_gain_integral.push_back(gain);
        ledger.mortality_sink_integral.push_back(sink);
        ledger.aged_out_term.push_back(aged);
        ledger.boundary_flux_term.push_back(flux);
        ledger.residual.push_back(total - ledger.initial_mass - gain + sink + aged);
    }
    return ledger;
}

double logistic_envelope(double S0_sup, double kappa1, double kappa2, double t) {
    if (S0_sup < 0.0) throw ConfigError("logistic_envelope: S0_sup must be nonnegative");
    if (S0_sup == 0.0) return 0.0;
    if (std::isinf(t)) return kappa2;
    return S0_sup / (std::exp(-kappa1 * t) * (1.0 - S0_sup / kappa2) + S0_sup / kappa2);
}

namespace {

constexpr double kClip = 1e-12;

template <class M>
void scan(M& values, PositivityReport& report, bool clip) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        for (Eigen::Index i = 0; i < values.rows(); ++i) {
            auto& v = values(i, j);
            report.min_value = std::min(report.min_value, static_cast<double>(v));
            if (!(v >= -kClip)) {
                report.pass = false;
            } else if (v < 0.0) {
                ++report.clipped;
                if (clip) v = 0.0;
            }
        }
    }
}

}  // namespace

PositivityReport positivity_check(State& state) {
    PositivityReport report;
    report.min_value = state.S.size() ? state.S.minCoeff() : 0.0;
    scan(state.S, report, true);
    scan(state.I, report, true);
    return report;
}

PositivityReport positivity_check(const State& state) {
    State copy = state;
    return positivity_check(copy);
}

std::vector<double> convergence_metric(const Trajectory& trajectory, const SteadyState& target,
                                       const SpatialGrid& grid, const AgeGrid& ages) {
    if (target.S_star.size() != grid.size() || target.I_star.rows() != grid.size() ||
        target.I_star.cols() != ages.size()) {
        throw ConfigError("convergence_metric: target does not match the grids");
    }
    std::vector<double> out;
    out.reserve(trajectory.snapshots.size());
    for (const State& s : trajectory.snapshots) {
        if (s.S.size() != grid.size() || s.I.cols() != ages.size()) {
            throw ConfigError("convergence_metric: snapshot does not match the grids");
        }
        const double dS = grid.weights().dot((s.S - target.S_star).cwiseAbs());
        const Eigen::VectorXd slice = (s.I - target.I_star).cwiseAbs().transpose() * grid.weights();
        out.push_back(dS + ages.weights().dot(slice));
    }
    return out;
}

double l1_bound(const Scenario& sc, double t) {
    const double S_mass = sc.grid.weights().dot(sc.S0);
    const Eigen::VectorXd slice = sc.I0.transpose() * sc.grid.weights();
    const double I_mass = sc.ages.weights().dot(slice);
    const double loss = (sc.rates.m() + sc.rates.r()).maxCoeff();
    return S_mass + I_mass + t * sc.grid.length() * sc.rates.kappa1() * sc.rates.kappa2() / 4.0 +
           loss * t * I_mass;
}

}  // namespace epi
