#include "agerates.hpp"

#include "errors.hpp"

#include <cmath>
#include <string>

namespace epi {

AgeGrid::AgeGrid(double a_max, int intervals) : a_max_(a_max), intervals_(intervals) {
    if (!std::isfinite(a_max) || a_max <= 0.0) {
        throw ConfigError("age grid: a_m must be positive and finite");
    }
    if (intervals < 2) {
        throw ConfigError("age grid: need at least 2 age intervals, got " +
                          std::to_string(intervals));
    }
    da_ = a_max / intervals;
    nodes_.resize(intervals + 1);
    for (int k = 0; k <= intervals; ++k) nodes_(k) = k * da_;
    nodes_(intervals) = a_max;
    weights_ = Eigen::VectorXd::Constant(intervals + 1, da_);
    weights_(0) = 0.5 * da_;
    weights_(intervals) = 0.5 * da_;
}

RateFunctions RateFunctions::constant(double kappa1, double kappa2, double d, double m, double b,
                                      double r) {
    RateFunctions f;
    f.kappa1 = kappa1;
    f.kappa2 = kappa2;
    f.d = [d](double) { return d; };
    f.m = [m](double, double) { return m; };
    f.r = [r](double, double) { return r; };
    f.b = [b](double, double) { return b; };
    f.homogeneous = true;
    return f;
}

RateSet::RateSet(RateFunctions functions, const AgeGrid& ages, const SpatialGrid& grid,
                 bool allow_zero_infection)
    : fns_(std::move(functions)) {
    if (!(fns_.kappa1 > 0.0) || !std::isfinite(fns_.kappa1)) {
        throw ConfigError("rates: kappa1 must be positive");
    }
    if (!(fns_.kappa2 > 0.0) || !std::isfinite(fns_.kappa2)) {
        throw ConfigError("rates: kappa2 must be positive");
    }
    if (!fns_.d || !fns_.m || !fns_.b) throw ConfigError("rates: d, m and b are required");
    if (!fns_.r) fns_.r = [](double, double) { return 0.0; };

    const int na = ages.size();
    const int n = grid.size();
    d_.resize(na);
    m_.resize(n, na);
    r_.resize(n, na);
    b_.resize(n, na);
    for (int k = 0; k < na; ++k) {
        const double a = ages.node(k);
        d_(k) = fns_.d(a);
        if (!std::isfinite(d_(k)) || d_(k) <= 0.0) {
            throw ConfigError("rates: diffusion d(a) must be positive, got " +
                              std::to_string(d_(k)) + " at a = " + std::to_string(a));
        }
        for (int i = 0; i < n; ++i) {
            const double x = grid.node(i);
            m_(i, k) = fns_.m(a, x);
            r_(i, k) = fns_.r(a, x);
            b_(i, k) = fns_.b(a, x);
        }
    }
    auto check = [](const AgeProfile& t, const char* name) {
        if (!t.allFinite() || t.minCoeff() < 0.0) {
            throw ConfigError(std::string("rates: ") + name + " must be finite and nonnegative");
        }
    };
    check(m_, "m");
    check(r_, "r");
    check(b_, "b");
    recovery_free_ = r_.maxCoeff() == 0.0;
    infection_free_ = b_.maxCoeff() == 0.0;
    if (infection_free_ && !allow_zero_infection) {
        throw ConfigError("rates: infection rate b vanishes identically");
    }
}

RateSet RateSet::with_infection_scaled(double factor, const AgeGrid& ages,
                                       const SpatialGrid& grid) const {
    RateFunctions f = fns_;
    f.b = [b = fns_.b, factor](double a, double x) { return factor * b(a, x); };
    return RateSet(std::move(f), ages, grid, factor == 0.0);
}

Eigen::VectorXd cumulative_integral(const AgeGrid& ages, const Eigen::VectorXd& values) {
    if (values.size() != ages.size()) {
        throw ConfigError("cumulative_integral: one value per age node required");
    }
    Eigen::VectorXd acc(ages.size());
    acc(0) = 0.0;
    for (int k = 1; k < ages.size(); ++k) {
        acc(k) = acc(k - 1) + 0.5 * ages.da() * (values(k - 1) + values(k));
    }
    return acc;
}

Eigen::VectorXd survival(const AgeGrid& ages, const Eigen::VectorXd& mortality) {
    if (mortality.size() != ages.size()) {
        throw ConfigError("survival: one mortality value per age node required");
    }
    if (mortality.minCoeff() < 0.0) throw ConfigError("survival: mortality must be nonnegative");
    return (-cumulative_integral(ages, mortality)).array().exp();
}

Eigen::VectorXd survival(const AgeGrid& ages, const AgeFunction& mortality) {
    Eigen::VectorXd m(ages.size());
    for (int k = 0; k < ages.size(); ++k) m(k) = mortality(ages.node(k));
    return survival(ages, m);
}

Field age_integral(const AgeGrid& ages, const AgeProfile& values) {
    if (values.cols() != ages.size()) {
        throw ConfigError("age_integral: expected " + std::to_string(ages.size()) +
                          " age slices, got " + std::to_string(values.cols()));
    }
    return values * ages.weights();
}

}  // namespace epi
