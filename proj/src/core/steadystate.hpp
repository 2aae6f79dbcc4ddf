#pragma once

#include "agerates.hpp"
#include "dynamics.hpp"
#include "spatial.hpp"

#include <optional>
#include <string>
#include <limits>
#include <utility>

namespace epi {

enum class SteadyKind : int { kTrivial = 0, kDiseaseFree = 1, kEndemic = 2 };

const char* to_string(SteadyKind kind);

struct SteadyState {
    SteadyKind kind = SteadyKind::kTrivial;
    Field S_star;
    AgeProfile I_star;
    double residual_S = 0.0;
    double residual_I = 0.0;
    /// False when the requested state does not exist (disease-free with kappa1 <= mu_0).
    bool exists = true;
    int iterations = 0;
    /// R0 used to build an endemic state, NaN otherwise.
    double R0 = std::numeric_limits<double>::quiet_NaN();
};

SteadyState trivial_state(const SpatialGrid& grid, const AgeGrid& ages);

struct NewtonOptions {
    double tolerance = 1e-10;
    int max_iterations = 100;
};

/// Positive solution of -Lap S + (kappa1/kappa2) S^2 - kappa1 S = 0 by damped Newton.
/// `initial` defaults to S = kappa2. Collapse to zero is reported through `exists`.
SteadyState disease_free(const SpatialGrid& grid, const AgeGrid& ages, const RateSet& rates,
                         const Field* initial = nullptr, const NewtonOptions& options = {});

/// Residual infinity-norm of the disease-free equation at S.
double disease_free_residual(const SpatialGrid& grid, const RateSet& rates, const Field& S);

/// How the closed-form endemic state evaluates Pi and R0.
enum class ClosedFormMode {
    kGrid,    ///< trapezoid rule on the sampled tables
    kExact,   ///< composite Gauss-Legendre on the rate callables
    kScheme,  ///< trapezoid with kappa1 replaced by (exp(kappa1 da) - 1)/da: the fixed point of the time stepper
};

/// S = kappa2/R0, I(a) = r0 kappa1 kappa2 (1 - r0) Pi(a) for homogeneous Neumann data
/// with r = 0. Throws DomainError if R0 <= 1. Residuals are the one-step drift.
SteadyState endemic_closed_form(const SpatialGrid& grid, const AgeGrid& ages, const RateSet& rates,
                                ClosedFormMode mode = ClosedFormMode::kGrid);

/// trapezoid R0 = kappa2 sum_k w_k b_k Pi_k for homogeneous rates.
double homogeneous_r0(const AgeGrid& ages, const RateSet& rates);

/// Infinity norms of the one-step drift of S and I.
std::pair<double, double> steady_residual(const SteadyState& state, const Scenario& scenario);
std::pair<double, double> steady_residual(const SteadyState& state, const SpatialGrid& grid,
                                          const AgeGrid& ages, const RateSet& rates);

struct ProbeOptions {
    int max_iterations = 5000;
    /// relative to the sup norm of the current iterate
    double tolerance = 1e-10;
    double initial_damping = 0.5;
};

struct ProbeResult {
    std::optional<SteadyState> state;
    int iterations = 0;
    std::string diagnostic;
};

/// Damped fixed-point iteration I0 <- S(I0) Q^0 I0 for a nontrivial endemic state.
ProbeResult endemic_probe(const SpatialGrid& grid, const AgeGrid& ages, const RateSet& rates,
                          const ProbeOptions& options = {});

}  // namespace epi
