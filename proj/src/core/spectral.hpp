#pragma once

#include "agerates.hpp"
#include "spatial.hpp"
#include "steadystate.hpp"

#include <complex>
#include <functional>
#include <optional>
#include <vector>

namespace epi {

using Complex = std::complex<double>;
using ComplexField = Eigen::VectorXcd;

/// e^{-lambda a}, evaluated component-wise so that conjugate arguments give conjugate results.
Complex damped_exponential(Complex lambda, double a);

/// S* Q^lambda u = S* sum_k W_k(lambda) b_k U_A(a_k, 0) u.
///
/// W_k integrates e^{-lambda a} exactly against the piecewise-linear
/// interpolant of the rest of the integrand, so W_k(0) are the trapezoid
/// weights and the operator vanishes as lambda -> +inf. The per-age matrices
/// diag(b_k) U_A(a_k, 0) are assembled once.
class QOperator {
public:
    QOperator(const SpatialGrid& grid, const AgeGrid& ages, const RateSet& rates, Field S_star);

    int size() const { return static_cast<int>(S_star_.size()); }
    const Field& S_star() const { return S_star_; }

    Field apply(double lambda, const Field& u) const;
    ComplexField apply(Complex lambda, const ComplexField& u) const;
    /// Dense matrix of S* Q^lambda.
    Eigen::MatrixXd matrix(double lambda) const;

private:
    AgeGrid ages_;
    Field S_star_;
    std::vector<Eigen::MatrixXd> kernels_;  // diag(b_k) U_A(a_k, 0)
};

Field q_operator_apply(double lambda, const Field& S_star, const Field& u, const SpatialGrid& grid,
                       const AgeGrid& ages, const RateSet& rates);
ComplexField q_operator_apply(Complex lambda, const Field& S_star, const ComplexField& u,
                              const SpatialGrid& grid, const AgeGrid& ages, const RateSet& rates);

struct RadiusResult {
    double radius = 0.0;
    Field eigenvector;  ///< nonnegative, unit sup norm
    int iterations = 0;
};

using LinearOperator = std::function<Field(const Field&)>;

/// Power iteration from the constant vector for a positivity-preserving operator.
RadiusResult spectral_radius(const LinearOperator& apply, int n, double tolerance = 1e-10,
                             int max_iterations = 10000);

struct ReproductionNumber {
    double value = 0.0;
    /// False when b vanishes identically (outside the model assumptions).
    bool valid_input = true;
    Field eigenvector;
};

/// R0 = r(S~ Q^0) at a disease-free state.
ReproductionNumber basic_reproduction_number(const SteadyState& disease_free, const SpatialGrid& grid,
                                             const AgeGrid& ages, const RateSet& rates);

/// Unique real s with r(S* Q^s) = 1, by bisection.
double spectral_bound(const QOperator& op, double tolerance = 1e-8);
double spectral_bound(const Field& S_star, const SpatialGrid& grid, const AgeGrid& ages,
                      const RateSet& rates, double tolerance = 1e-8);

struct PrincipalEigen {
    double lambda = 0.0;
    Field phi;  ///< positive, unit norm in the grid inner product
    int iterations = 0;
};

/// Smallest eigenvalue of -Lap_B + diag(q) by shifted inverse iteration.
PrincipalEigen principal_eigenvalue(const Field& q, const SpatialGrid& grid);

/// Coefficients of R_{lambda,mu}: R = sum_k c_k e^{-lambda a_k} with
/// c_k = r0 kappa2 w_k b_k Pi_k exp(-mu D_k), D the cumulative diffusion.
class CharacteristicFunction {
public:
    CharacteristicFunction(const AgeGrid& ages, const RateSet& rates, double mu);

    double mu() const { return mu_; }
    double r0() const { return r0_; }
    double kappa1() const { return kappa1_; }

    Complex R(Complex lambda) const;
    /// 1/R - 1 + (1 - r0)/((lambda + mu)/kappa1 + r0)
    Complex F(Complex lambda) const;
    /// (zeta + r0) - R (zeta + 2 r0 - 1) with zeta = (lambda + mu)/kappa1; same zeros as F, entire.
    Complex H(Complex lambda) const;
    Complex dH(Complex lambda) const;

private:
    Eigen::VectorXd ages_;
    Eigen::VectorXd coeff_;
    double mu_;
    double r0_;
    double kappa1_;
};

Complex char_value(Complex lambda, double mu, const RateSet& rates, const AgeGrid& ages);

struct RootRegion {
    double re_min;
    double re_max;
    double im_max;
    /// Defaults -5 kappa1, 2 kappa1, 50/a_m.
    static RootRegion defaults(double kappa1, double a_max);
};

struct CharRoot {
    int j = 0;
    double mu = 0.0;
    Complex root;
    double residual = 0.0;  ///< |F(root)|
};

struct CharRootSearch {
    std::vector<CharRoot> roots;
    /// Zero count per eigenvalue from the argument principle on the whole region.
    std::vector<int> counted;
    bool complete = true;
    std::string diagnostic;
};

CharRootSearch endemic_char_roots(const RateSet& rates, const AgeGrid& ages, const SpatialGrid& grid,
                                  int J_max, std::optional<RootRegion> region = std::nullopt);

enum class Verdict : int { kLinearlyStable = 0, kLinearlyUnstable = 1, kInconclusive = 2 };

const char* to_string(Verdict v);

/// Verdict from the sign of a decisive real part with the neutral band |x| <= tol.
Verdict verdict_from_growth(double growth, double tol = 1e-6);

struct SpectralReport {
    SteadyKind kind = SteadyKind::kTrivial;
    double R0 = 0.0;
    std::optional<double> s0;
    std::optional<double> lambda0;
    std::vector<CharRoot> char_roots;
    Verdict verdict = Verdict::kInconclusive;
    std::string note;
};

struct StabilityOptions {
    int J_max = 8;
    std::optional<RootRegion> region;
    double zero_tolerance = 1e-6;
};

SpectralReport classify_stability(const SteadyState& steady, const SpatialGrid& grid,
                                  const AgeGrid& ages, const RateSet& rates,
                                  const StabilityOptions& options = {});

/// Dense Jacobian of the time stepper's one-step map at (S, I) with state
/// ordering [S, I_0, ..., I_Na]. Limited to n <= 32 and Na <= 40.
Eigen::MatrixXd linearized_step_matrix(const Scenario& scenario, const Field& S, const AgeProfile& I);

/// Eigenvalues log(nu)/dt of the linearized one-step map, sorted by decreasing real part.
std::vector<Complex> linearization_spectrum(const Scenario& scenario, const Field& S,
                                            const AgeProfile& I);

}  // namespace epi
