#include "spectral.hpp"

#include "dynamics.hpp"
#include "errors.hpp"
#include "evolution.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <type_traits>
#include <sstream>

namespace epi {

Complex damped_exponential(Complex lambda, double a) {
    const double mag = std::exp(-lambda.real() * a);
    const double phase = lambda.imag() * a;
    return {mag * std::cos(phase), -mag * std::sin(phase)};
}

namespace {

// Product-trapezoid weights: int e^{-lambda a} g(a) da with g linear on each
// age cell and the exponential integrated exactly. Reduce to trapezoid at lambda = 0.
template <class T>
std::vector<T> exponential_weights(const AgeGrid& ages, T lambda) {
    const double da = ages.da();
    const T z = lambda * da;
    T alpha;
    T beta;
    if (std::abs(z) < 1.0) {
        alpha = 0.0;
        beta = 0.0;
        T term = 1.0;  // (-z)^n / n!
        for (int n = 0; n < 25; ++n) {
            alpha += term / double((n + 1) * (n + 2));
            beta += term / double(n + 2);
            term *= -z / double(n + 1);
        }
    } else {
        T ez;
        if constexpr (std::is_same_v<T, Complex>) {
            ez = damped_exponential(lambda, da);
        } else {
            ez = std::exp(-z);
        }
        alpha = (z - 1.0 + ez) / (z * z);
        beta = (1.0 - (1.0 + z) * ez) / (z * z);
    }
    const int N = ages.intervals();
    std::vector<T> e(N + 1);
    for (int k = 0; k <= N; ++k) {
        if constexpr (std::is_same_v<T, Complex>) {
            e[k] = damped_exponential(lambda, ages.node(k));
        } else {
            e[k] = std::exp(-lambda * ages.node(k));
        }
    }
    std::vector<T> w(N + 1, T(0.0));
    for (int k = 0; k < N; ++k) {
        w[k] += da * alpha * e[k];
        w[k + 1] += da * beta * e[k];
    }
    return w;
}

}  // namespace

QOperator::QOperator(const SpatialGrid& grid, const AgeGrid& ages, const RateSet& rates, Field S_star)
    : ages_(ages), S_star_(std::move(S_star)) {
    if (S_star_.size() != grid.size()) throw ConfigError("QOperator: S* has the wrong length");
    const AgeEvolution evolution(grid, ages, rates);
    kernels_ = evolution.transport_matrices();
    for (int k = 0; k < ages.size(); ++k) kernels_[k] = rates.b().col(k).asDiagonal() * kernels_[k];
}

Field QOperator::apply(double lambda, const Field& u) const {
    if (u.size() != size()) throw ConfigError("QOperator: field has the wrong length");
    const std::vector<double> w = exponential_weights(ages_, lambda);
    Field acc = Field::Zero(size());
    for (int k = 0; k < ages_.size(); ++k) acc.noalias() += w[k] * (kernels_[k] * u);
    return S_star_.cwiseProduct(acc);
}

ComplexField QOperator::apply(Complex lambda, const ComplexField& u) const {
    if (u.size() != size()) throw ConfigError("QOperator: field has the wrong length");
    const std::vector<Complex> w = exponential_weights(ages_, lambda);
    ComplexField acc = ComplexField::Zero(size());
    for (int k = 0; k < ages_.size(); ++k) acc.noalias() += w[k] * (kernels_[k].cast<Complex>() * u);
    return S_star_.cast<Complex>().cwiseProduct(acc);
}

Eigen::MatrixXd QOperator::matrix(double lambda) const {
    const std::vector<double> w = exponential_weights(ages_, lambda);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(size(), size());
    for (int k = 0; k < ages_.size(); ++k) acc.noalias() += w[k] * kernels_[k];
    return S_star_.asDiagonal() * acc;
}

Field q_operator_apply(double lambda, const Field& S_star, const Field& u, const SpatialGrid& grid,
                       const AgeGrid& ages, const RateSet& rates) {
    return QOperator(grid, ages, rates, S_star).apply(lambda, u);
}

ComplexField q_operator_apply(Complex lambda, const Field& S_star, const ComplexField& u,
                              const SpatialGrid& grid, const AgeGrid& ages, const RateSet& rates) {
    return QOperator(grid, ages, rates, S_star).apply(lambda, u);
}

RadiusResult spectral_radius(const LinearOperator& apply, int n, double tolerance, int max_iterations) {
    Field u = Field::Constant(n, 1.0 / n);
    double previous = std::numeric_limits<double>::quiet_NaN();
    for (int it = 1; it <= max_iterations; ++it) {
        Field v = apply(u);
        if (!v.allFinite()) throw NumericalError("spectral_radius: operator produced non-finite values");
        const double estimate = v.sum();
        if (v.cwiseAbs().maxCoeff() == 0.0) return {0.0, Field::Zero(n), it};
        u = v / estimate;
        if (std::abs(estimate - previous) < tolerance) {
            return {estimate, u / u.maxCoeff(), it};
        }
        previous = estimate;
    }
    std::ostringstream msg;
    msg << "spectral_radius: power iteration did not converge in " << max_iterations << " iterations";
    throw NumericalError(msg.str());
}

ReproductionNumber basic_reproduction_number(const SteadyState& dfe, const SpatialGrid& grid,
                                             const AgeGrid& ages, const RateSet& rates) {
    if (dfe.kind != SteadyKind::kDiseaseFree || !dfe.exists) {
        throw DomainError("basic_reproduction_number: needs an existing disease-free state");
    }
    const QOperator op(grid, ages, rates, dfe.S_star);
    const Eigen::MatrixXd K = op.matrix(0.0);
    const RadiusResult r = spectral_radius([&](const Field& u) { return Field(K * u); }, op.size());
    return {r.radius, !rates.infection_free(), r.eigenvector};
}

double spectral_bound(const QOperator& op, double tolerance) {
    auto g = [&](double lambda) {
        const Eigen::MatrixXd K = op.matrix(lambda);
        if (!K.allFinite()) throw NumericalError("spectral_bound: bracket growth failure (overflow)");
        return spectral_radius([&](const Field& u) { return Field(K * u); }, op.size()).radius - 1.0;
    };
    double lo = -1.0;
    double hi = 1.0;
    double g_lo = g(lo);
    double g_hi = g(hi);
    for (int grow = 0; g_lo <= 0.0; ++grow) {
        if (grow > 60) throw NumericalError("spectral_bound: bracket growth failure below");
        hi = lo;
        g_hi = g_lo;
        lo *= 2.0;
        g_lo = g(lo);
    }
    for (int grow = 0; g_hi > 0.0; ++grow) {
        if (grow > 60) throw NumericalError("spectral_bound: bracket growth failure above");
        lo = hi;
        g_lo = g_hi;
        hi *= 2.0;
        g_hi = g(hi);
    }
    if (std::abs(g_lo) <= tolerance) return lo;
    if (std::abs(g_hi) <= tolerance) return hi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if (std::abs(gm) <= tolerance || hi - lo <= 1e-15 * std::max(1.0, std::abs(mid))) return mid;
        if (gm > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    throw NumericalError("spectral_bound: bisection did not converge");
}

double spectral_bound(const Field& S_star, const SpatialGrid& grid, const AgeGrid& ages,
                      const RateSet& rates, double tolerance) {
    return spectral_bound(QOperator(grid, ages, rates, S_star), tolerance);
}

PrincipalEigen principal_eigenvalue(const Field& q, const SpatialGrid& grid) {
    if (q.size() != grid.size()) throw ConfigError("principal_eigenvalue: q has the wrong length");
    if (!q.allFinite()) throw ConfigError("principal_eigenvalue: q must be bounded");
    const double shift = q.minCoeff() - 1.0;
    const Field alpha = (q.array() - shift).matrix();
    Field v = grid.constant(1.0);
    v /= std::sqrt(grid.inner(v, v));
    double lambda = std::numeric_limits<double>::quiet_NaN();
    for (int it = 1; it <= 10000; ++it) {
        Field w = solve_shifted(grid, alpha, v);
        w /= std::sqrt(grid.inner(w, w));
        const Field Aw = (-apply_laplacian(grid, w).array() + q.array() * w.array()).matrix();
        const double next = grid.inner(w, Aw);
        const double change = (w - v).cwiseAbs().maxCoeff();
        v = std::move(w);
        if (std::abs(next - lambda) <= 1e-13 * std::max(1.0, std::abs(next)) && change <= 1e-10) {
            return {next, v, it};
        }
        lambda = next;
    }
    throw NumericalError("principal_eigenvalue: inverse iteration did not converge");
}

CharacteristicFunction::CharacteristicFunction(const AgeGrid& ages, const RateSet& rates, double mu)
    : ages_(ages.nodes()), mu_(mu), kappa1_(rates.kappa1()) {
    if (!rates.homogeneous()) throw DomainError("characteristic equation needs homogeneous rates");
    const Eigen::VectorXd m = rates.m().row(0).transpose();
    const Eigen::VectorXd b = rates.b().row(0).transpose();
    const Eigen::VectorXd pi = survival(ages, m);
    const Eigen::VectorXd D = cumulative_integral(ages, rates.d());
    const double R0 = homogeneous_r0(ages, rates);
    r0_ = 1.0 / R0;
    coeff_ = (r0_ * rates.kappa2() * ages.weights().array() * b.array() * pi.array() *
              (-mu * D.array()).exp())
                 .matrix();
}

Complex CharacteristicFunction::R(Complex lambda) const {
    Complex acc = 0.0;
    for (Eigen::Index k = 0; k < coeff_.size(); ++k) acc += coeff_(k) * damped_exponential(lambda, ages_(k));
    return acc;
}

Complex CharacteristicFunction::F(Complex lambda) const {
    const Complex zeta = (lambda + mu_) / kappa1_;
    return 1.0 / R(lambda) - 1.0 + (1.0 - r0_) / (zeta + r0_);
}

Complex CharacteristicFunction::H(Complex lambda) const {
    const Complex zeta = (lambda + mu_) / kappa1_;
    return (zeta + r0_) - R(lambda) * (zeta + 2.0 * r0_ - 1.0);
}

Complex CharacteristicFunction::dH(Complex lambda) const {
    Complex r = 0.0;
    Complex dr = 0.0;
    for (Eigen::Index k = 0; k < coeff_.size(); ++k) {
        const Complex e = coeff_(k) * damped_exponential(lambda, ages_(k));
        r += e;
        dr -= ages_(k) * e;
    }
    const Complex zeta = (lambda + mu_) / kappa1_;
    return 1.0 / kappa1_ - dr * (zeta + 2.0 * r0_ - 1.0) - r / kappa1_;
}

Complex char_value(Complex lambda, double mu, const RateSet& rates, const AgeGrid& ages) {
    return CharacteristicFunction(ages, rates, mu).R(lambda);
}

RootRegion RootRegion::defaults(double kappa1, double a_max) {
    return {-5.0 * kappa1, 2.0 * kappa1, 50.0 / a_max};
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct RootOnContour {};

class ArgumentPrinciple {
public:
    ArgumentPrinciple(const CharacteristicFunction& f, double spacing) : f_(f), spacing_(spacing) {}

    Complex value(Complex z) const {
        const Complex v = f_.H(z);
        if (std::abs(v) < 1e-280 || !std::isfinite(std::abs(v))) throw RootOnContour{};
        return v;
    }

    double edge(Complex p, Complex q) const {
        const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(q - p) / spacing_)));
        double total = 0.0;
        Complex zp = p;
        Complex vp = value(p);
        for (int i = 1; i <= pieces; ++i) {
            const Complex zq = i == pieces ? q : p + (q - p) * (static_cast<double>(i) / pieces);
            const Complex vq = value(zq);
            total += refine(zp, vp, zq, vq, 0);
            zp = zq;
            vp = vq;
        }
        return total;
    }

    /// Winding number of H around the rectangle, or -1 if it is not near an integer.
    int count(double x0, double x1, double y0, double y1) const {
        const Complex a(x0, y0), b(x1, y0), c(x1, y1), d(x0, y1);
        const double total = edge(a, b) + edge(b, c) + edge(c, d) + edge(d, a);
        const double winding = total / kTwoPi;
        const double rounded = std::round(winding);
        if (std::abs(winding - rounded) > 1e-3 || rounded < 0) return -1;
        return static_cast<int>(rounded);
    }

private:
    double refine(Complex zp, Complex vp, Complex zq, Complex vq, int depth) const {
        const double d = std::arg(vq / vp);
        if (std::abs(d) <= 0.5 || depth > 40) return d;
        const Complex zm = 0.5 * (zp + zq);
        const Complex vm = value(zm);
        return refine(zp, vp, zm, vm, depth + 1) + refine(zm, vm, zq, vq, depth + 1);
    }

    const CharacteristicFunction& f_;
    double spacing_;
};

struct Rect {
    double x0, x1, y0, y1;
    bool contains(Complex z, double pad) const {
        return z.real() >= x0 - pad && z.real() <= x1 + pad && z.imag() >= y0 - pad && z.imag() <= y1 + pad;
    }
    double size() const { return std::max(x1 - x0, y1 - y0); }
};

std::optional<Complex> newton(const CharacteristicFunction& f, Complex z) {
    for (int it = 0; it < 100; ++it) {
        const Complex h = f.H(z);
        const Complex dh = f.dH(z);
        if (std::abs(dh) == 0.0) return std::nullopt;
        const Complex step = h / dh;
        z -= step;
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return std::nullopt;
        if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) return z;
    }
    return z;
}

class RootSearch {
public:
    RootSearch(const CharacteristicFunction& f, double spacing) : f_(f), ap_(f, spacing) {}

    bool search(const Rect& r, int count, int depth, std::vector<Complex>& out) {
        if (count == 0) return true;
        if (depth > 60) return false;
        if (count == 1 || r.size() < 1e-7) {
            const Complex centre(0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1));
            const auto z = newton(f_, centre);
            if (z && r.contains(*z, 1e-9 * std::max(1.0, std::abs(*z)))) {
                for (int i = 0; i < count; ++i) out.push_back(*z);
                return true;
            }
            if (r.size() < 1e-7) return false;
        }
        constexpr double kSplit = 0.5 + 0.0137;
        const double xm = r.x0 + kSplit * (r.x1 - r.x0);
        const double ym = r.y0 + kSplit * (r.y1 - r.y0);
        const Rect parts[4] = {{r.x0, xm, r.y0, ym}, {xm, r.x1, r.y0, ym}, {r.x0, xm, ym, r.y1}, {xm, r.x1, ym, r.y1}};
        int counts[4];
        int sum = 0;
        for (int i = 0; i < 4; ++i) {
            try {
                counts[i] = ap_.count(parts[i].x0, parts[i].x1, parts[i].y0, parts[i].y1);
            } catch (const RootOnContour&) {
                counts[i] = -1;
            }
            if (counts[i] < 0) return false;
            sum += counts[i];
        }
        if (sum != count) return false;
        bool ok = true;
        for (int i = 0; i < 4; ++i) ok = search(parts[i], counts[i], depth + 1, out) && ok;
        return ok;
    }

private:
    const CharacteristicFunction& f_;
    ArgumentPrinciple ap_;
};

}  // namespace

CharRootSearch endemic_char_roots(const RateSet& rates, const AgeGrid& ages, const SpatialGrid& grid,
                                  int J_max, std::optional<RootRegion> region) {
    if (!grid.neumann() || !rates.homogeneous() || !rates.recovery_free()) {
        throw DomainError("endemic_char_roots: needs Neumann boundary, homogeneous rates and r = 0");
    }
    if (J_max < 1 || J_max > grid.size()) throw ConfigError("endemic_char_roots: J_max out of range");
    if (!(homogeneous_r0(ages, rates) > 1.0)) throw DomainError("endemic_char_roots: needs R0 > 1");
    const RootRegion box = region.value_or(RootRegion::defaults(rates.kappa1(), ages.a_max()));
    if (!(box.re_min < box.re_max) || !(box.im_max > 0.0)) throw ConfigError("endemic_char_roots: empty region");

    CharRootSearch result;
    const double spacing = 0.25 / ages.a_max();
    for (int j = 0; j < J_max; ++j) {
        const double mu = grid.eigenvalue(j);
        const CharacteristicFunction f(ages, rates, mu);
        // nudge the outer contour off roots lying exactly on it
        Rect outer{box.re_min, box.re_max, -box.im_max, box.im_max};
        int total = -1;
        for (int attempt = 0; attempt < 4 && total < 0; ++attempt) {
            try {
                total = ArgumentPrinciple(f, spacing).count(outer.x0, outer.x1, outer.y0, outer.y1);
            } catch (const RootOnContour&) {
                total = -1;
            }
            if (total < 0) {
                outer.x0 -= 1e-7;
                outer.x1 += 1.3e-7;
                outer.y0 -= 1.1e-7;
                outer.y1 += 1.1e-7;
            }
        }
        result.counted.push_back(total);
        if (total < 0) {
            result.complete = false;
            result.diagnostic += "winding number not integral for mu_" + std::to_string(j) + "; ";
            continue;
        }
        std::vector<Complex> found;
        RootSearch search(f, spacing);
        if (!search.search(outer, total, 0, found)) {
            result.complete = false;
            result.diagnostic += "subdivision failed for mu_" + std::to_string(j) + "; ";
        }
        std::sort(found.begin(), found.end(), [](Complex a, Complex b) {
            return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
        });
        for (const Complex z : found) result.roots.push_back({j, mu, z, std::abs(f.F(z))});
    }
    return result;
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::kLinearlyStable: return "linearly_stable";
        case Verdict::kLinearlyUnstable: return "linearly_unstable";
        case Verdict::kInconclusive: return "inconclusive";
    }
    return "unknown";
}

Verdict verdict_from_growth(double growth, double tol) {
    if (growth < -tol) return Verdict::kLinearlyStable;
    if (growth > tol) return Verdict::kLinearlyUnstable;
    return Verdict::kInconclusive;
}

SpectralReport classify_stability(const SteadyState& steady, const SpatialGrid& grid, const AgeGrid& ages,
                                  const RateSet& rates, const StabilityOptions& options) {
    SpectralReport report;
    report.kind = steady.kind;
    const double tol = options.zero_tolerance;
    switch (steady.kind) {
        case SteadyKind::kTrivial: {
            const double mu0 = grid.smallest_eigenvalue();
            report.s0 = rates.kappa1() - mu0;
            report.lambda0 = mu0;
            report.verdict = verdict_from_growth(*report.s0, tol);
            break;
        }
        case SteadyKind::kDiseaseFree: {
            if (!steady.exists) {
                report.note = "disease-free state does not exist";
                break;
            }
            const ReproductionNumber r = basic_reproduction_number(steady, grid, ages, rates);
            report.R0 = r.value;
            if (!r.valid_input) {
                report.note = "infection rate vanishes identically";
                break;
            }
            report.s0 = spectral_bound(steady.S_star, grid, ages, rates);
            const Field q = (rates.kappa1() * (2.0 * steady.S_star.array() / rates.kappa2() - 1.0)).matrix();
            report.lambda0 = principal_eigenvalue(q, grid).lambda;
            report.verdict = verdict_from_growth(std::max(*report.s0, -*report.lambda0), tol);
            break;
        }
        case SteadyKind::kEndemic: {
            if (!grid.neumann() || !rates.homogeneous() || !rates.recovery_free()) {
                report.R0 = steady.R0;
                report.note = "no stability criterion for this endemic setting";
                break;
            }
            report.R0 = homogeneous_r0(ages, rates);
            const int J = std::min(options.J_max, grid.size());
            const CharRootSearch search = endemic_char_roots(rates, ages, grid, J, options.region);
            report.char_roots = search.roots;
            if (!search.complete) {
                report.note = search.diagnostic;
                break;
            }
            double growth = -std::numeric_limits<double>::infinity();
            for (const CharRoot& r : search.roots) growth = std::max(growth, r.root.real());
            if (search.roots.empty()) growth = RootRegion::defaults(rates.kappa1(), ages.a_max()).re_min;
            if (options.region && search.roots.empty()) growth = options.region->re_min;
            report.verdict = verdict_from_growth(growth, tol);
            break;
        }
    }
    return report;
}

Eigen::MatrixXd linearized_step_matrix(const Scenario& sc, const Field& S, const AgeProfile& I) {
    const int n = sc.grid.size();
    const int na = sc.ages.intervals();
    if (n > 32 || na > 40) throw ConfigError("linearization oracle is limited to n <= 32 and Na <= 40");
    if (S.size() != n || I.rows() != n || I.cols() != na + 1) {
        throw ConfigError("linearization oracle: state does not match the scenario");
    }
    const Stepper stepper(sc);
    const AgeEvolution& ev = stepper.evolution();
    const double dt = sc.dt();
    const double kt = stepper.logistic_rate();
    const double k2 = sc.rates.kappa2();
    const Eigen::VectorXd& w = sc.ages.weights();
    const AgeProfile& b = sc.rates.b();
    const AgeProfile& r = sc.rates.r();

    const State next = stepper.step({0.0, S, I});
    const Field P = infection_pressure(sc.ages, sc.rates, I);
    const Field alpha = (1.0 / dt + kt * S.array() / k2 + P.array()).matrix();
    Eigen::MatrixXd Ainv(n, n);
    for (int c = 0; c < n; ++c) Ainv.col(c) = solve_shifted(sc.grid, alpha, Field::Unit(n, c));

    Field partial = Field::Zero(n);
    for (int k = 1; k <= na; ++k) partial += w(k) * b.col(k).cwiseProduct(next.I.col(k));
    const Field denom = (1.0 - next.S.array() * w(0) * b.col(0).array()).matrix();
    const Field dI0_dS = (partial.array() / denom.array().square()).matrix();
    const Field dI0_dp = (next.S.array() / denom.array()).matrix();

    std::vector<Eigen::MatrixXd> E(na);
    for (int k = 0; k < na; ++k) E[k] = ev.cell_matrix(k);

    const int N = n * (na + 2);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(N, N);
    auto block = [&](int row, int col) { return J.block(row * n, col * n, n, n); };
    // ordering: block 0 = S, block 1 + k = I_k
    block(0, 0) = Ainv * (1.0 / dt + kt * (1.0 - next.S.array() / k2)).matrix().asDiagonal();
    for (int k = 0; k <= na; ++k) {
        block(0, 1 + k) = Ainv * (w(k) * (r.col(k).array() - next.S.array() * b.col(k).array())).matrix().asDiagonal();
    }
    for (int k = 0; k < na; ++k) block(2 + k, 1 + k) = E[k];
    block(1, 0) = dI0_dS.asDiagonal() * J.block(0, 0, n, n);
    for (int k = 0; k <= na; ++k) {
        Eigen::MatrixXd row = dI0_dS.asDiagonal() * J.block(0, (1 + k) * n, n, n);
        if (k < na) row += Field(w(k + 1) * dI0_dp.cwiseProduct(b.col(k + 1))).asDiagonal() * E[k];
        block(1, 1 + k) = row;
    }
    return J;
}

std::vector<Complex> linearization_spectrum(const Scenario& sc, const Field& S, const AgeProfile& I) {
    const Eigen::MatrixXd J = linearized_step_matrix(sc, S, I);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(J, false);
    if (solver.info() != Eigen::Success) throw NumericalError("linearization oracle: eigensolve failed");
    std::vector<Complex> out;
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
        const Complex nu = solver.eigenvalues()(i);
        if (std::abs(nu) == 0.0) continue;
        out.push_back(std::log(nu) / sc.dt());
    }
    std::sort(out.begin(), out.end(), [](Complex a, Complex b) {
        return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
    });
    return out;
}

}  // namespace epi
