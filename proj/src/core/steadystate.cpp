#include "steadystate.hpp"

#include "errors.hpp"
#include "evolution.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <array>
#include <cmath>
#include <sstream>

namespace epi {

namespace {

struct LogisticProblem {
    double kappa1;
    double kappa2;
    Field pressure;  // node-wise loss rate q
    Field source;    // node-wise recovery inflow
};

Field logistic_residual(const SpatialGrid& grid, const LogisticProblem& p, const Field& S) {
    return (-apply_laplacian(grid, S).array() + (p.kappa1 / p.kappa2) * S.array().square() -
            p.kappa1 * S.array() + p.pressure.array() * S.array() - p.source.array())
        .matrix();
}

Field solve_jacobian(const SpatialGrid& grid, const Field& shift, const Field& rhs) {
    const Tridiagonal t = minus_laplacian(grid);
    const int n = grid.size();
    Eigen::SparseMatrix<double> J(n, n);
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(3 * n);
    for (int i = 0; i < n; ++i) {
        entries.emplace_back(i, i, t.diag(i) + shift(i));
        if (i > 0) entries.emplace_back(i, i - 1, t.lower(i));
        if (i + 1 < n) entries.emplace_back(i, i + 1, t.upper(i));
    }
    J.setFromTriplets(entries.begin(), entries.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success) throw NumericalError("newton: singular Jacobian");
    return lu.solve(rhs);
}

struct NewtonOutcome {
    Field S;
    double residual;
    int iterations;
    bool converged;
    std::string trace;
};

NewtonOutcome logistic_newton(const SpatialGrid& grid, const LogisticProblem& p, Field S,
                              const NewtonOptions& opt) {
    Field F = logistic_residual(grid, p, S);
    double res = F.cwiseAbs().maxCoeff();
    std::ostringstream trace;
    int it = 0;
    for (; it < opt.max_iterations && res > opt.tolerance; ++it) {
        const Field shift =
            (2.0 * p.kappa1 / p.kappa2 * S.array() - p.kappa1 + p.pressure.array()).matrix();
        const Field delta = solve_jacobian(grid, shift, F);
        double step = 1.0;
        Field trial;
        double trial_res = 0.0;
        for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
            trial = S - step * delta;
            trial_res = logistic_residual(grid, p, trial).cwiseAbs().maxCoeff();
            if (trial_res < res) break;
        }
        trace << " [" << it << "] res=" << res << " step=" << step;
        if (!(trial_res < res)) break;
        S = std::move(trial);
        F = logistic_residual(grid, p, S);
        res = F.cwiseAbs().maxCoeff();
    }
    return {std::move(S), res, it, res <= opt.tolerance, trace.str()};
}

LogisticProblem plain_logistic(const SpatialGrid& grid, const RateSet& rates) {
    return {rates.kappa1(), rates.kappa2(), Field::Zero(grid.size()), Field::Zero(grid.size())};
}

// 8-point Gauss-Legendre rule on [-1, 1].
constexpr std::array<double, 8> kGaussNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGaussWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

template <class F>
double gauss(const F& f, double lo, double hi) {
    const double c = 0.5 * (lo + hi);
    const double r = 0.5 * (hi - lo);
    double acc = 0.0;
    for (std::size_t g = 0; g < kGaussNodes.size(); ++g) acc += kGaussWeights[g] * f(c + r * kGaussNodes[g]);
    return acc * r;
}

struct ExactSurvival {
    Eigen::VectorXd node_survival;
    double r0_integral;  // int b Pi da
};

ExactSurvival exact_survival(const AgeGrid& ages, const RateFunctions& fns, double x) {
    auto m = [&](double a) { return fns.m(a, x); };
    const int na = ages.intervals();
    Eigen::VectorXd cum(na + 1);
    cum(0) = 0.0;
    double integral = 0.0;
    for (int k = 0; k < na; ++k) {
        const double lo = ages.node(k);
        const double hi = ages.node(k + 1);
        integral += gauss(
            [&](double a) { return fns.b(a, x) * std::exp(-(cum(k) + gauss(m, lo, a))); }, lo, hi);
        cum(k + 1) = cum(k) + gauss(m, lo, hi);
    }
    return {(-cum.array()).exp().matrix(), integral};
}

}  // namespace

const char* to_string(SteadyKind kind) {
    switch (kind) {
        case SteadyKind::kTrivial: return "trivial";
        case SteadyKind::kDiseaseFree: return "disease_free";
        case SteadyKind::kEndemic: return "endemic";
    }
    return "unknown";
}

SteadyState trivial_state(const SpatialGrid& grid, const AgeGrid& ages) {
    SteadyState s;
    s.kind = SteadyKind::kTrivial;
    s.S_star = Field::Zero(grid.size());
    s.I_star = AgeProfile::Zero(grid.size(), ages.size());
    return s;
}

double disease_free_residual(const SpatialGrid& grid, const RateSet& rates, const Field& S) {
    return logistic_residual(grid, plain_logistic(grid, rates), S).cwiseAbs().maxCoeff();
}

SteadyState disease_free(const SpatialGrid& grid, const AgeGrid& ages, const RateSet& rates,
                         const Field* initial, const NewtonOptions& options) {
    SteadyState s;
    s.kind = SteadyKind::kDiseaseFree;
    s.I_star = AgeProfile::Zero(grid.size(), ages.size());
    if (initial && initial->size() != grid.size()) {
        throw ConfigError("disease_free: initial guess has the wrong length");
    }
    if (grid.neumann() && !initial) {
        s.S_star = grid.constant(rates.kappa2());
        s.residual_S = disease_free_residual(grid, rates, s.S_star);
        return s;
    }
    const Field start = initial ? *initial : grid.constant(rates.kappa2());
    NewtonOutcome out = logistic_newton(grid, plain_logistic(grid, rates), start, options);
    const bool collapsed = out.S.cwiseAbs().maxCoeff() <= 1e-8 * rates.kappa2();
    if (!out.converged) {
        if (rates.kappa1() <= grid.smallest_eigenvalue()) {
            s.exists = false;
            s.S_star = Field::Zero(grid.size());
            s.residual_S = out.residual;
            s.iterations = out.iterations;
            return s;
        }
        std::ostringstream msg;
        msg << "disease_free: Newton did not converge after " << out.iterations
            << " iterations:" << out.trace;
        throw NumericalError(msg.str());
    }
    s.exists = !collapsed;
    s.S_star = collapsed ? Field::Zero(grid.size()) : out.S;
    s.residual_S = out.residual;
    s.iterations = out.iterations;
    return s;
}

double homogeneous_r0(const AgeGrid& ages, const RateSet& rates) {
    const Eigen::VectorXd pi = survival(ages, Eigen::VectorXd(rates.m().row(0).transpose()));
    return rates.kappa2() * ages.weights().dot(rates.b().row(0).transpose().cwiseProduct(pi));
}

SteadyState endemic_closed_form(const SpatialGrid& grid, const AgeGrid& ages, const RateSet& rates,
                                ClosedFormMode mode) {
    if (!grid.neumann() || !rates.homogeneous() || !rates.recovery_free()) {
        throw DomainError("endemic_closed_form: needs Neumann boundary, homogeneous rates and r = 0");
    }
    const double k1 = rates.kappa1();
    const double k2 = rates.kappa2();
    Eigen::VectorXd pi;
    double R0 = 0.0;
    if (mode == ClosedFormMode::kExact) {
        const ExactSurvival ex = exact_survival(ages, rates.functions(), grid.node(0));
        pi = ex.node_survival;
        R0 = k2 * ex.r0_integral;
    } else {
        pi = survival(ages, Eigen::VectorXd(rates.m().row(0).transpose()));
        R0 = homogeneous_r0(ages, rates);
    }
    if (!(R0 > 1.0)) {
        std::ostringstream msg;
        msg << "endemic_closed_form: R0 = " << R0 << " <= 1, no endemic steady state";
        throw DomainError(msg.str());
    }
    const double r0 = 1.0 / R0;
    const double growth = mode == ClosedFormMode::kScheme ? std::expm1(k1 * ages.da()) / ages.da() : k1;
    const double istar = r0 * growth * k2 * (1.0 - r0);

    SteadyState s;
    s.kind = SteadyKind::kEndemic;
    s.R0 = R0;
    s.S_star = grid.constant(k2 * r0);
    s.I_star = AgeProfile(grid.size(), ages.size());
    for (int k = 0; k < ages.size(); ++k) s.I_star.col(k).setConstant(istar * pi(k));
    const auto [dS, dI] = steady_residual(s, grid, ages, rates);
    s.residual_S = dS;
    s.residual_I = dI;
    return s;
}

std::pair<double, double> steady_residual(const SteadyState& state, const Scenario& scenario) {
    const State now{0.0, state.S_star, state.I_star};
    const State next = Stepper(scenario).step(now);
    return {(next.S - now.S).cwiseAbs().maxCoeff(), (next.I - now.I).cwiseAbs().maxCoeff()};
}

std::pair<double, double> steady_residual(const SteadyState& state, const SpatialGrid& grid,
                                          const AgeGrid& ages, const RateSet& rates) {
    const Scenario sc(grid, ages, rates, state.S_star, state.I_star, ages.da());
    return steady_residual(state, sc);
}

ProbeResult endemic_probe(const SpatialGrid& grid, const AgeGrid& ages, const RateSet& rates,
                          const ProbeOptions& options) {
    ProbeResult result;
    if (rates.infection_free()) {
        result.diagnostic = "infection rate vanishes identically";
        return result;
    }
    const SteadyState dfe = disease_free(grid, ages, rates);
    if (!dfe.exists) {
        result.diagnostic = "no disease-free state (kappa1 <= mu_0), S collapses to 0";
        return result;
    }

    const AgeEvolution evolution(grid, ages, rates);
    const std::vector<Eigen::MatrixXd> U = evolution.transport_matrices();
    const int n = grid.size();
    Eigen::MatrixXd Qb = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd Qr = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < ages.size(); ++k) {
        const double w = ages.weights()(k);
        Qb.noalias() += w * rates.b().col(k).asDiagonal() * U[k];
        if (!rates.recovery_free()) Qr.noalias() += w * rates.r().col(k).asDiagonal() * U[k];
    }

    // start on the positive eigenvector of S~ Q^0
    Field I0 = grid.constant(1.0);
    const Eigen::MatrixXd K0 = dfe.S_star.asDiagonal() * Qb;
    for (int it = 0; it < 500; ++it) {
        const Field next = K0 * I0;
        const double norm = next.maxCoeff();
        if (!(norm > 0.0)) break;
        I0 = next / norm;
    }
    const double scale = rates.kappa1() * rates.kappa2() / 4.0;
    I0 *= scale;

    NewtonOptions inner;
    inner.tolerance = 1e-12 * std::max(1.0, scale);
    inner.max_iterations = 100;
    Field S;
    double theta = options.initial_damping;
    double previous = std::numeric_limits<double>::infinity();
    double residual_S = 0.0;
    for (int it = 1; it <= options.max_iterations; ++it) {
        LogisticProblem p{rates.kappa1(), rates.kappa2(), Qb * I0, Qr * I0};
        NewtonOutcome inner_out = logistic_newton(grid, p, dfe.S_star, inner);
        S = inner_out.S;
        residual_S = inner_out.residual;
        const Field image = S.cwiseProduct(p.pressure);
        const double res = (image - I0).cwiseAbs().maxCoeff();
        result.iterations = it;
        const double size = I0.cwiseAbs().maxCoeff();
        if (size <= 1e-13 * scale) {
            result.diagnostic = "iteration decayed to the disease-free state";
            return result;
        }
        if (res <= options.tolerance * size) {
            if (S.minCoeff() < 0.0 || image.minCoeff() < 0.0) {
                result.diagnostic = "fixed point is not nonnegative";
                return result;
            }
            SteadyState s;
            s.kind = SteadyKind::kEndemic;
            s.S_star = S;
            s.I_star = AgeProfile(n, ages.size());
            for (int k = 0; k < ages.size(); ++k) s.I_star.col(k) = U[k] * image;
            s.residual_S = residual_S;
            s.residual_I = res;
            s.iterations = it;
            result.state = std::move(s);
            return result;
        }
        if (res > previous) theta = std::max(theta * 0.5, 1.0 / 1024.0);
        previous = res;
        I0 = (1.0 - theta) * I0 + theta * image;
    }
    std::ostringstream msg;
    msg << "iteration budget of " << options.max_iterations << " exhausted";
    result.diagnostic = msg.str();
    return result;
}

}  // namespace epi
