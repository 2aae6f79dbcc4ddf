#include "evolution.hpp"

#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace epi {

namespace {

/// One CN substep (I - dt/2 L)^{-1} (I + dt/2 L) with a prefactored left side.
class CrankNicolson {
public:
    CrankNicolson(const SpatialGrid& grid, double dt)
        : explicit_(minus_laplacian(grid, -0.5 * dt)), implicit_(minus_laplacian(grid, 0.5 * dt)) {
        explicit_.diag.array() += 1.0;
        implicit_.diag.array() += 1.0;
        const Eigen::Index n = implicit_.diag.size();
        cp_.resize(n);
        inv_pivot_.resize(n);
        double pivot = implicit_.diag(0);
        inv_pivot_(0) = 1.0 / pivot;
        cp_(0) = implicit_.upper(0) * inv_pivot_(0);
        for (Eigen::Index i = 1; i < n; ++i) {
            pivot = implicit_.diag(i) - implicit_.lower(i) * cp_(i - 1);
            inv_pivot_(i) = 1.0 / pivot;
            cp_(i) = i + 1 < n ? implicit_.upper(i) * inv_pivot_(i) : 0.0;
        }
    }

    void apply(Field& u) const {
        Field y = explicit_.apply(u);
        const Eigen::Index n = y.size();
        y(0) *= inv_pivot_(0);
        for (Eigen::Index i = 1; i < n; ++i) {
            y(i) = (y(i) - implicit_.lower(i) * y(i - 1)) * inv_pivot_(i);
        }
        for (Eigen::Index i = n - 2; i >= 0; --i) y(i) -= cp_(i) * y(i + 1);
        u = std::move(y);
    }

private:
    Tridiagonal explicit_;
    Tridiagonal implicit_;
    Eigen::VectorXd cp_;
    Eigen::VectorXd inv_pivot_;
};

}  // namespace

int heat_substeps(const SpatialGrid& grid, double t, bool positive) {
    if (t < 0.0 || !std::isfinite(t)) throw ConfigError("heat_step: time must be nonnegative");
    if (t == 0.0) return 0;
    const double max_dt = positive ? 0.5 * grid.h() * grid.h() : grid.h();
    return std::max(1, static_cast<int>(std::ceil(t / max_dt - 1e-9)));
}

Field heat_step(const SpatialGrid& grid, double t, const Field& u, bool positive) {
    if (u.size() != grid.size()) throw ConfigError("heat_step: field size mismatch");
    const int steps = heat_substeps(grid, t, positive);
    Field out = u;
    if (steps == 0) return out;
    const CrankNicolson cn(grid, t / steps);
    for (int s = 0; s < steps; ++s) cn.apply(out);
    return out;
}

HeatPropagator::HeatPropagator(const SpatialGrid& grid, double tau)
    : tau_(tau), substeps_(heat_substeps(grid, tau)) {
    const int n = grid.size();
    matrix_ = Eigen::MatrixXd::Identity(n, n);
    if (substeps_ == 0) return;
    const CrankNicolson cn(grid, tau / substeps_);
    for (int j = 0; j < n; ++j) {
        Field col = Field::Unit(n, j);
        for (int s = 0; s < substeps_; ++s) cn.apply(col);
        matrix_.col(j) = col;
    }
}

std::shared_ptr<const HeatPropagator> PropagatorCache::get(double tau) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(tau);
    if (it != entries_.end()) return it->second;
    auto prop = std::make_shared<const HeatPropagator>(grid_, tau);
    entries_.emplace(tau, prop);
    return prop;
}

std::size_t PropagatorCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

AgeEvolution::AgeEvolution(const SpatialGrid& grid, const AgeGrid& ages, const RateSet& rates)
    : grid_(grid), ages_(ages), d_(rates.d()), loss_(rates.m() + rates.r()), cache_(grid) {
    if (rates.age_nodes() != ages.size() || rates.space_nodes() != grid.size()) {
        throw ConfigError("evolution: rate tables do not match the grids");
    }
    half_decay_ = (-0.5 * ages.da() * loss_.array()).exp();
    cell_propagators_.reserve(ages.intervals());
    for (int k = 0; k < ages.intervals(); ++k) {
        cell_propagators_.push_back(cache_.get(0.5 * ages.da() * (d_(k) + d_(k + 1))));
    }
}

Field AgeEvolution::advance_cell(int k, const Field& in) const {
    Field tmp = half_decay_.col(k).cwiseProduct(in);
    Field out = cell_propagators_[k]->matrix() * tmp;
    return out.cwiseProduct(half_decay_.col(k + 1));
}

void AgeEvolution::shift_profile(AgeProfile& profile) const {
    Field tmp(grid_.size());
    for (int k = ages_.intervals() - 1; k >= 0; --k) {
        tmp = half_decay_.col(k).cwiseProduct(profile.col(k));
        profile.col(k + 1).noalias() = cell_propagators_[k]->matrix() * tmp;
        profile.col(k + 1).array() *= half_decay_.col(k + 1).array();
    }
}

Eigen::MatrixXd AgeEvolution::cell_matrix(int k) const {
    return half_decay_.col(k + 1).asDiagonal() * cell_propagators_[k]->matrix() *
           half_decay_.col(k).asDiagonal();
}

std::vector<Eigen::MatrixXd> AgeEvolution::transport_matrices() const {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(ages_.size());
    out.push_back(Eigen::MatrixXd::Identity(grid_.size(), grid_.size()));
    for (int k = 0; k < ages_.intervals(); ++k) {
        Eigen::MatrixXd next = cell_propagators_[k]->matrix() *
                               (half_decay_.col(k).asDiagonal() * out.back());
        out.push_back(half_decay_.col(k + 1).asDiagonal() * next);
    }
    return out;
}

double AgeEvolution::interpolate_loss(int i, double a) const {
    const int k = std::min(static_cast<int>(a / ages_.da()), ages_.intervals() - 1);
    const double theta = (a - ages_.node(k)) / ages_.da();
    return (1.0 - theta) * loss_(i, k) + theta * loss_(i, k + 1);
}

double AgeEvolution::interpolate_diffusion(double a) const {
    const int k = std::min(static_cast<int>(a / ages_.da()), ages_.intervals() - 1);
    const double theta = (a - ages_.node(k)) / ages_.da();
    return (1.0 - theta) * d_(k) + theta * d_(k + 1);
}

Field AgeEvolution::advance_piece(double a_left, double a_right, const Field& in) const {
    const double len = a_right - a_left;
    const int n = grid_.size();
    Field out(n);
    for (int i = 0; i < n; ++i) out(i) = std::exp(-0.5 * len * interpolate_loss(i, a_left)) * in(i);
    const double tau = 0.5 * len * (interpolate_diffusion(a_left) + interpolate_diffusion(a_right));
    out = cache_.get(tau)->matrix() * out;
    for (int i = 0; i < n; ++i) out(i) *= std::exp(-0.5 * len * interpolate_loss(i, a_right));
    return out;
}

Field AgeEvolution::step(double a_from, double a_to, const Field& u) const {
    if (u.size() != grid_.size()) throw ConfigError("evolution_step: field size mismatch");
    if (!(a_from >= 0.0) || !(a_to <= ages_.a_max() * (1.0 + 1e-14)) || a_to < a_from) {
        throw ConfigError("evolution_step: need 0 <= a_from <= a_to <= a_m, got [" +
                          std::to_string(a_from) + ", " + std::to_string(a_to) + "]");
    }
    a_to = std::min(a_to, ages_.a_max());
    Field v = u;
    const double da = ages_.da();
    const double snap = 1e-12 * da;
    double a = a_from;
    while (a_to - a > snap) {
        int k = static_cast<int>(std::floor(a / da + 1e-9));
        k = std::min(k, ages_.intervals() - 1);
        const double right = std::min(ages_.node(k + 1), a_to);
        const bool aligned = std::abs(a - ages_.node(k)) <= snap &&
                             std::abs(right - ages_.node(k + 1)) <= snap;
        v = aligned ? advance_cell(k, v) : advance_piece(a, right, v);
        a = right;
    }
    return v;
}

Field evolution_step(const SpatialGrid& grid, const AgeGrid& ages, const RateSet& rates,
                     double a_from, double a_to, const Field& u) {
    return AgeEvolution(grid, ages, rates).step(a_from, a_to, u);
}

}  // namespace epi
