#include "dynamics.hpp"
#include "errors.hpp"
#include "oracles.hpp"
#include "spectral.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace epi;

namespace {

RateSet constant(const AgeGrid& a, const SpatialGrid& g, double k1, double k2, double b) {
    return RateSet(RateFunctions::constant(k1, k2, 1, 1, b), a, g);
}

double trap_exp(double a_m, int na) {
    return oracle::trapezoid([](double x) { return std::exp(-x); }, a_m, na);
}

}  // namespace

TEST(QOperator, ConstantFieldGivesR0) {
    const auto g = SpatialGrid::build(0, 1, 24, 1);
    const AgeGrid a(2.0, 200);
    const auto r = constant(a, g, 1, 2, 1.2);
    const Field out = q_operator_apply(0.0, g.constant(2.0), g.constant(1.0), g, a, r);
    const double R0 = 2.0 * 1.2 * trap_exp(2.0, 200);
    EXPECT_LE((out.array() - R0).abs().maxCoeff(), 1e-12);
}

TEST(QOperator, ZeroInfectionGivesZero) {
    const auto g = SpatialGrid::build(0, 1, 12, 1);
    const AgeGrid a(2.0, 40);
    const RateSet r(RateFunctions::constant(1, 2, 1, 1, 0.0), a, g, true);
    const Field out = q_operator_apply(0.3, g.constant(2.0), g.nodes(), g, a, r);
    EXPECT_EQ(out.cwiseAbs().maxCoeff(), 0.0);
}

TEST(QOperator, LargeLambdaIsDamped) {
    const auto g = SpatialGrid::build(0, 1, 12, 1);
    const AgeGrid a(2.0, 2000);
    const auto r = constant(a, g, 1, 2, 1.2);
    const Field out = q_operator_apply(50.0, g.constant(2.0), g.constant(1.0), g, a, r);
    const double bound = 2.0 * 1.2 * (1.0 - std::exp(-51.0 * 2.0)) / 51.0;
    EXPECT_LE(out.cwiseAbs().maxCoeff(), 0.094);
    EXPECT_NEAR(out.cwiseAbs().maxCoeff(), bound, 1e-7);
}

TEST(QOperator, ComplexConjugateSymmetry) {
    const auto g = SpatialGrid::build(0, 1, 10, 0);
    const AgeGrid a(2.0, 40);
    const auto r = constant(a, g, 12, 2, 1.2);
    const QOperator op(g, a, r, g.constant(1.5));
    ComplexField u(10);
    for (int i = 0; i < 10; ++i) u(i) = Complex(std::sin(i + 1.0), std::cos(2.0 * i));
    const Complex lam(0.4, 2.5);
    const ComplexField p = op.apply(lam, u);
    const ComplexField q = op.apply(std::conj(lam), ComplexField(u.conjugate()));
    EXPECT_LE((p.conjugate() - q).cwiseAbs().maxCoeff(), 1e-14);
    const Field real = op.apply(0.4, Field(u.real()));
    EXPECT_LE((op.apply(Complex(0.4, 0.0), ComplexField(u.real().cast<Complex>())).real() - real)
                  .cwiseAbs()
                  .maxCoeff(),
              1e-13);
}

TEST(Radius, HalfIdentity) {
    const auto res = spectral_radius([](const Field& u) { return Field(0.5 * u); }, 7);
    EXPECT_NEAR(res.radius, 0.5, 1e-14);
    EXPECT_GE(res.eigenvector.minCoeff(), 0.0);
}

TEST(Radius, NonConvergenceThrows) {
    // rotation by 90 degrees on a 2-cycle never settles from the constant start
    const auto swap_scale = [](const Field& u) {
        Field v(2);
        v << 2.0 * u(1), 0.5 * u(0);
        return v;
    };
    EXPECT_THROW(spectral_radius(swap_scale, 2, 1e-10, 200), NumericalError);
}

TEST(Radius, NeumannMatchesClosedForm) {
    const auto g = SpatialGrid::build(0, 1, 16, 1);
    const AgeGrid a(2.0, 1000);
    const auto r = constant(a, g, 1, 2, 1.2);
    const QOperator op(g, a, r, g.constant(2.0));
    const auto res = spectral_radius([&](const Field& u) { return op.apply(0.0, u); }, 16);
    EXPECT_NEAR(res.radius, oracle::r0_constant(2, 1.2, 1, 2), 1e-6);
    EXPECT_LE((res.eigenvector.array() - res.eigenvector(0)).abs().maxCoeff(), 1e-8);
}

TEST(Radius, DirichletMatchesEigenExpansion) {
    const int n = 20;
    const auto g = SpatialGrid::build(0, 1, n, 0);
    const AgeGrid a(2.0, 40);
    const double dcoef = 0.3;
    const RateSet r(RateFunctions::constant(15, 2, dcoef, 1, 1.7), a, g);
    const auto dfe = disease_free(g, a, r);
    ASSERT_TRUE(dfe.exists);
    const QOperator op(g, a, r, dfe.S_star);
    const auto res = spectral_radius([&](const Field& u) { return op.apply(0.0, u); }, n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-oracle::dense_laplacian(n, g.h(), false));
    const Eigen::MatrixXd& V = es.eigenvectors();
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k <= 40; ++k) {
        const double ak = 2.0 * k / 40.0;
        const double w = (k == 0 || k == 40 ? 0.5 : 1.0) * 0.05;
        const Eigen::VectorXd heat = (-dcoef * ak * es.eigenvalues().array()).exp();
        Q += w * 1.7 * std::exp(-ak) * V * heat.asDiagonal() * V.transpose();
    }
    const Eigen::MatrixXd K = dfe.S_star.asDiagonal() * Q;
    const double ref = Eigen::EigenSolver<Eigen::MatrixXd>(K).eigenvalues().cwiseAbs().maxCoeff();
    EXPECT_NEAR(res.radius, ref, 1e-4 * ref);
}

TEST(R0, ClosedFormValues) {
    const auto g = SpatialGrid::build(0, 1, 16, 1);
    const AgeGrid a(2.0, 200);
    for (double b : {0.5, 1.2}) {
        const auto r = constant(a, g, 1, 2, b);
        const auto R0 = basic_reproduction_number(disease_free(g, a, r), g, a, r);
        EXPECT_TRUE(R0.valid_input);
        EXPECT_NEAR(R0.value, 2.0 * b * trap_exp(2.0, 200), 1e-10);
        EXPECT_NEAR(R0.value, oracle::r0_constant(2, b, 1, 2), 1e-5 * R0.value);
    }
    const auto r = constant(a, g, 1, 2, 0.5);
    EXPECT_NEAR(basic_reproduction_number(disease_free(g, a, r), g, a, r).value, 0.864665, 1e-5);
}

TEST(R0, ZeroInfectionFlagged) {
    const auto g = SpatialGrid::build(0, 1, 16, 1);
    const AgeGrid a(2.0, 40);
    const RateSet r(RateFunctions::constant(1, 2, 1, 1, 0.0), a, g, true);
    const auto R0 = basic_reproduction_number(disease_free(g, a, r), g, a, r);
    EXPECT_EQ(R0.value, 0.0);
    EXPECT_FALSE(R0.valid_input);
}

TEST(R0, RequiresDiseaseFreeState) {
    const auto g = SpatialGrid::build(0, 1, 16, 1);
    const AgeGrid a(2.0, 40);
    const auto r = constant(a, g, 1, 2, 1.2);
    EXPECT_THROW(basic_reproduction_number(trivial_state(g, a), g, a, r), DomainError);
}

TEST(SpectralBound, MatchesScalarOracle) {
    const auto g = SpatialGrid::build(0, 1, 8, 1);
    const AgeGrid a(2.0, 400);
    for (double b : {0.5, 1.2}) {
        const auto r = constant(a, g, 1, 2, b);
        const double s0 = spectral_bound(g.constant(2.0), g, a, r);
        const double ref = oracle::bisect(
            [&](double s) { return oracle::radius_constant(s, 2, b, 1, 2) - 1.0; }, -0.99, 5.0);
        EXPECT_NEAR(s0, ref, 1e-5);
    }
    EXPECT_NEAR(spectral_bound(g.constant(2.0), g, a, constant(a, g, 1, 2, 0.5)), -0.203, 1e-3);
    EXPECT_NEAR(spectral_bound(g.constant(2.0), g, a, constant(a, g, 1, 2, 1.2)), 1.380, 1e-3);
}

TEST(SpectralBound, ThresholdGivesZero) {
    const auto g = SpatialGrid::build(0, 1, 8, 1);
    const AgeGrid a(2.0, 100);
    const double b = 1.0 / (2.0 * trap_exp(2.0, 100));
    EXPECT_NEAR(spectral_bound(g.constant(2.0), g, a, constant(a, g, 1, 2, b)), 0.0, 1e-6);
}

TEST(SpectralBound, RadiusDecreasesInLambda) {
    const auto g = SpatialGrid::build(0, 1, 10, 0);
    const AgeGrid a(2.0, 50);
    const auto r = constant(a, g, 15, 2, 1.2);
    const auto dfe = disease_free(g, a, r);
    const QOperator op(g, a, r, dfe.S_star);
    double previous = std::numeric_limits<double>::infinity();
    for (double lam = -0.9; lam <= 5.0; lam += 0.25) {
        const double rad = spectral_radius([&](const Field& u) { return op.apply(lam, u); }, 10).radius;
        EXPECT_LT(rad, previous - 1e-8);
        previous = rad;
    }
    // with b(0) > 0 the radius decays like sup(S* b) / lambda
    const double far = spectral_radius([&](const Field& u) { return op.apply(1e3, u); }, 10).radius;
    EXPECT_LT(far, dfe.S_star.maxCoeff() * 1.2 / 1e3);
    EXPECT_GT(far, 0.0);
}

TEST(SpectralBound, RadiusVanishesForLateInfectivity) {
    const auto g = SpatialGrid::build(0, 1, 10, 1);
    const AgeGrid a(2.0, 80);
    RateFunctions f = RateFunctions::constant(1, 2, 1, 1, 0.0);
    f.b = [](double age, double) { return age >= 0.5 && age <= 1.5 ? 3.0 : 0.0; };
    const RateSet r(f, a, g);
    const QOperator op(g, a, r, g.constant(2.0));
    EXPECT_LT(spectral_radius([&](const Field& u) { return op.apply(1e3, u); }, 10).radius, 1e-6);
}

TEST(PrincipalEigen, ZeroPotentialNeumann) {
    const auto g = SpatialGrid::build(0, 1, 30, 1);
    const auto pe = principal_eigenvalue(g.constant(0.0), g);
    EXPECT_NEAR(pe.lambda, 0.0, 1e-10);
    EXPECT_LE((pe.phi.array() - pe.phi(0)).abs().maxCoeff(), 1e-8);
    EXPECT_GT(pe.phi.minCoeff(), 0.0);
    EXPECT_NEAR(g.inner(pe.phi, pe.phi), 1.0, 1e-10);
}

TEST(PrincipalEigen, ConstantShift) {
    for (int delta : {0, 1}) {
        const auto g = SpatialGrid::build(0, 2, 40, delta);
        const auto pe = principal_eigenvalue(g.constant(1.75), g);
        EXPECT_NEAR(pe.lambda, g.smallest_eigenvalue() + 1.75, 1e-9);
    }
}

TEST(PrincipalEigen, MatchesDenseSolveAndIsMonotone) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-2.0, 3.0);
    std::uniform_real_distribution<double> P(0.0, 1.0);
    for (int delta : {0, 1}) {
        const int n = 25;
        const auto g = SpatialGrid::build(0, 1, n, delta);
        for (int trial = 0; trial < 5; ++trial) {
            Field q1(n), q2(n);
            for (int i = 0; i < n; ++i) {
                q1(i) = U(rng);
                q2(i) = q1(i) + (P(rng) < 0.5 ? 0.0 : P(rng));
            }
            q2(trial) += 0.5;
            const double l1 = principal_eigenvalue(q1, g).lambda;
            const double l2 = principal_eigenvalue(q2, g).lambda;
            const Eigen::MatrixXd A = -oracle::dense_laplacian(n, g.h(), delta == 1) + Eigen::MatrixXd(q1.asDiagonal());
            const double ref = Eigen::EigenSolver<Eigen::MatrixXd>(A).eigenvalues().real().minCoeff();
            EXPECT_NEAR(l1, ref, 1e-8 * std::max(1.0, std::abs(ref)));
            EXPECT_LT(l1, l2);
        }
    }
}

TEST(CharValue, UnitAtOrigin) {
    const auto g = SpatialGrid::build(0, 1, 8, 1);
    const AgeGrid a(2.0, 200);
    const auto r = constant(a, g, 1, 2, 1.2);
    EXPECT_NEAR(char_value(Complex(0, 0), 0.0, r, a).real(), 1.0, 1e-12);
    EXPECT_NEAR(char_value(Complex(0, 0), 0.0, r, a).imag(), 0.0, 1e-15);
}

TEST(CharValue, DampedIntegral) {
    const auto g = SpatialGrid::build(0, 1, 8, 1);
    const AgeGrid a(2.0, 2000);
    const auto r = constant(a, g, 1, 2, 1.2);
    const double r0 = 1.0 / oracle::r0_constant(2, 1.2, 1, 2);
    EXPECT_NEAR(char_value(Complex(1, 0), 0.0, r, a).real(), r0 * 2.4 * (1.0 - std::exp(-4.0)) / 2.0, 1e-6);
    const Complex with_mu = char_value(Complex(0, 0), 3.0, r, a);
    EXPECT_NEAR(with_mu.real(), r0 * 2.4 * (1.0 - std::exp(-8.0)) / 4.0, 1e-6);
}

TEST(CharValue, BoundedAndConjugateSymmetric) {
    const auto g = SpatialGrid::build(0, 1, 8, 1);
    const AgeGrid a(2.0, 100);
    const auto r = constant(a, g, 1, 2, 1.2);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> re(0.0, 4.0), im(-30.0, 30.0), mu(0.0, 40.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Complex lam(re(rng), im(rng));
        const double m = trial % 4 == 0 ? 0.0 : mu(rng);
        const Complex v = char_value(lam, m, r, a);
        EXPECT_LE(std::abs(v), 1.0 + 1e-12);
        const Complex w = char_value(std::conj(lam), m, r, a);
        EXPECT_EQ(w.real(), v.real());
        EXPECT_EQ(w.imag(), -v.imag());
    }
}

TEST(CharFunction, PositiveOnNonnegativeAxis) {
    const auto g = SpatialGrid::build(0, 1, 8, 1);
    const AgeGrid a(2.0, 100);
    const auto r = constant(a, g, 1, 2, 1.2);
    const CharacteristicFunction f(a, r, 0.0);
    const double r0 = f.r0();
    EXPECT_NEAR(f.F(Complex(0, 0)).real(), (1.0 - r0) / r0, 1e-10);
    EXPECT_GT(f.F(Complex(0, 0)).real(), 0.0);
    for (double mu : {0.0, 9.87, 39.5}) {
        const CharacteristicFunction fm(a, r, mu);
        for (double lam = 0.0; lam <= 50.0; lam += 0.125) EXPECT_GT(fm.F(Complex(lam, 0)).real(), 0.0);
    }
}

TEST(CharFunction, DerivativeMatchesDifference) {
    const auto g = SpatialGrid::build(0, 1, 8, 1);
    const AgeGrid a(2.0, 100);
    const CharacteristicFunction f(a, constant(a, g, 1, 2, 1.2), 2.0);
    const Complex z(-0.3, 1.1);
    const double h = 1e-6;
    const Complex fd = (f.H(z + h) - f.H(z - h)) / (2.0 * h);
    EXPECT_LE(std::abs(fd - f.dH(z)), 1e-7);
}

TEST(CharRoots, EndemicRootsInLeftHalfPlane) {
    const auto g = SpatialGrid::build(0, 1, 16, 1);
    const AgeGrid a(2.0, 100);
    const auto r = constant(a, g, 1, 2, 1.2);
    const auto search = endemic_char_roots(r, a, g, 8);
    EXPECT_TRUE(search.complete) << search.diagnostic;
    ASSERT_EQ(search.counted.size(), 8u);
    int total = 0;
    for (int c : search.counted) total += c;
    EXPECT_EQ(static_cast<int>(search.roots.size()), total);
    EXPECT_GT(total, 0);
    for (const auto& root : search.roots) {
        EXPECT_LT(root.root.real(), -1e-6);
        EXPECT_LE(root.residual, 1e-8);
    }
}

TEST(CharRoots, RequiresHomogeneousNeumannAboveThreshold) {
    const AgeGrid a(2.0, 40);
    const auto g = SpatialGrid::build(0, 1, 8, 1);
    EXPECT_THROW(endemic_char_roots(constant(a, g, 1, 2, 0.5), a, g, 2), DomainError);
    const auto d = SpatialGrid::build(0, 1, 8, 0);
    EXPECT_THROW(endemic_char_roots(constant(a, d, 1, 2, 1.2), a, d, 2), DomainError);
}

TEST(Verdict, NeutralBand) {
    EXPECT_EQ(verdict_from_growth(-1e-3), Verdict::kLinearlyStable);
    EXPECT_EQ(verdict_from_growth(1e-3), Verdict::kLinearlyUnstable);
    EXPECT_EQ(verdict_from_growth(5e-7), Verdict::kInconclusive);
    EXPECT_EQ(verdict_from_growth(-5e-7), Verdict::kInconclusive);
    EXPECT_STREQ(to_string(Verdict::kLinearlyStable), "linearly_stable");
}

TEST(Classify, TrivialNeumannUnstable) {
    const auto g = SpatialGrid::build(0, 1, 16, 1);
    const AgeGrid a(2.0, 40);
    const auto rep = classify_stability(trivial_state(g, a), g, a, constant(a, g, 1, 2, 1.2));
    EXPECT_EQ(rep.verdict, Verdict::kLinearlyUnstable);
}

TEST(Classify, TrivialFlipsAtPrincipalEigenvalue) {
    const auto g = SpatialGrid::build(0, 1, 32, 0);
    const AgeGrid a(2.0, 40);
    const double mu0 = g.smallest_eigenvalue();
    EXPECT_EQ(classify_stability(trivial_state(g, a), g, a, constant(a, g, mu0 - 0.1, 2, 1.2)).verdict,
              Verdict::kLinearlyStable);
    EXPECT_EQ(classify_stability(trivial_state(g, a), g, a, constant(a, g, mu0 + 0.1, 2, 1.2)).verdict,
              Verdict::kLinearlyUnstable);
}

TEST(Classify, DiseaseFreeFollowsR0) {
    const auto g = SpatialGrid::build(0, 1, 16, 1);
    const AgeGrid a(2.0, 100);
    for (double b : {0.5, 1.2}) {
        const auto r = constant(a, g, 1, 2, b);
        const auto rep = classify_stability(disease_free(g, a, r), g, a, r);
        ASSERT_TRUE(rep.s0);
        EXPECT_EQ(rep.verdict, b < 1 ? Verdict::kLinearlyStable : Verdict::kLinearlyUnstable);
        EXPECT_EQ(*rep.s0 < 0, rep.R0 < 1);
    }
}

TEST(Classify, EndemicStable) {
    const auto g = SpatialGrid::build(0, 1, 16, 1);
    const AgeGrid a(2.0, 100);
    const auto r = constant(a, g, 1, 2, 1.2);
    const auto rep = classify_stability(endemic_closed_form(g, a, r), g, a, r);
    EXPECT_EQ(rep.verdict, Verdict::kLinearlyStable);
    EXPECT_FALSE(rep.char_roots.empty());
    EXPECT_NEAR(rep.R0, 2.0 * 1.2 * trap_exp(2.0, 100), 1e-10);
}

TEST(Classify, EndemicDirichletInconclusive) {
    const auto g = SpatialGrid::build(0, 1, 16, 0);
    const AgeGrid a(2.0, 40);
    RateFunctions f = RateFunctions::constant(20, 2, 0.5, 1, 6.0);
    const RateSet r(f, a, g);
    const auto probe = endemic_probe(g, a, r);
    ASSERT_TRUE(probe.state) << probe.diagnostic;
    const auto rep = classify_stability(*probe.state, g, a, r);
    EXPECT_EQ(rep.verdict, Verdict::kInconclusive);
    EXPECT_FALSE(rep.note.empty());
}

TEST(Linearization, LeadingModeTracksSpectralBound) {
    const auto g = SpatialGrid::build(0, 1, 8, 1);
    const AgeGrid a(2.0, 40);
    const auto r = constant(a, g, 1, 2, 0.5);
    const Scenario sc(g, a, r, g.constant(2.0), AgeProfile::Zero(8, 41), 1.0);
    const auto modes = linearization_spectrum(sc, g.constant(2.0), AgeProfile::Zero(8, 41));
    ASSERT_FALSE(modes.empty());
    const double s0 = spectral_bound(g.constant(2.0), g, a, r);
    EXPECT_NEAR(modes.front().real(), s0, 0.02);
    EXPECT_NEAR(modes.front().imag(), 0.0, 1e-9);
}
