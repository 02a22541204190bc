#pragma once

// History functions φ ∈ C([-Δ,0], Rⁿ) on a uniform node grid, their norms and
// semi-norms, and the two ways of producing a new window from an old one:
// the Driver extension and appending solution data.

#include "rfdiss/errors.hpp"
#include "rfdiss/hermite.hpp"
#include "rfdiss/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace rfdiss {

/// Read-only view of a history window θ ↦ φ(θ), θ ∈ [-Δ,0]. Vector fields
/// receive this interface so the solver can hand them windows into its
/// trajectory without copying.
class History {
public:
    virtual ~History() = default;
    virtual double delay() const = 0;
    virtual Eigen::Index dim() const = 0;
    virtual Vec eval(double theta) const = 0;

    Vec operator()(double theta) const { return eval(theta); }
};

class HistoryFunction final : public History {
public:
    HistoryFunction(double delay, double grid_step, std::vector<Vec> values,
                    std::vector<Vec> left_slopes, std::vector<Vec> right_slopes)
        : delay_(delay), grid_step_(grid_step)
    {
        const std::size_t pieces = piece_count(delay, grid_step);
        if (values.size() != pieces + 1 || left_slopes.size() != values.size() ||
            right_slopes.size() != values.size()) {
            throw DomainError("HistoryFunction: node count must equal delay/grid_step + 1");
        }
        const Eigen::Index n = values.front().size();
        if (n == 0) {
            throw DomainError("HistoryFunction: zero state dimension");
        }
        nodes_.reserve(values.size());
        for (std::size_t j = 0; j < values.size(); ++j) {
            if (values[j].size() != n || left_slopes[j].size() != n || right_slopes[j].size() != n) {
                throw DomainError("HistoryFunction: inconsistent node dimensions");
            }
            nodes_.push_back(node_time(j), std::move(values[j]), std::move(left_slopes[j]),
                             std::move(right_slopes[j]));
        }
    }

    HistoryFunction(double delay, double grid_step, std::vector<Vec> values, std::vector<Vec> slopes)
        : HistoryFunction(delay, grid_step, values, slopes, slopes)
    {
    }

    static HistoryFunction from_function(double delay, double grid_step,
                                         const std::function<Vec(double)>& f,
                                         const std::function<Vec(double)>& df)
    {
        const std::size_t count = piece_count(delay, grid_step) + 1;
        std::vector<Vec> values;
        std::vector<Vec> slopes;
        values.reserve(count);
        slopes.reserve(count);
        for (std::size_t j = 0; j < count; ++j) {
            const double theta = grid_theta(j, count - 1, grid_step);
            values.push_back(f(theta));
            slopes.push_back(df(theta));
        }
        return HistoryFunction(delay, grid_step, std::move(values), std::move(slopes));
    }

    static HistoryFunction constant(double delay, double grid_step, const Vec& c)
    {
        return from_function(
            delay, grid_step, [&](double) { return c; },
            [&](double) { return Vec::Zero(c.size()).eval(); });
    }

    /// φ(θ) = a + bθ.
    static HistoryFunction linear(double delay, double grid_step, const Vec& a, const Vec& b)
    {
        return from_function(
            delay, grid_step, [&](double th) { return (a + th * b).eval(); },
            [&](double) { return b; });
    }

    /// φ(θ) = offset + amplitude ⊙ sin(ωθ + phase).
    static HistoryFunction sinusoid(double delay, double grid_step, const Vec& offset,
                                    const Vec& amplitude, double omega, double phase)
    {
        return from_function(
            delay, grid_step,
            [&](double th) { return (offset + amplitude * std::sin(omega * th + phase)).eval(); },
            [&](double th) { return (amplitude * (omega * std::cos(omega * th + phase))).eval(); });
    }

    double delay() const override { return delay_; }
    Eigen::Index dim() const override { return nodes_.values().front().size(); }
    double grid_step() const noexcept { return grid_step_; }
    std::size_t node_count() const noexcept { return nodes_.size(); }
    double node_time(std::size_t j) const
    {
        return grid_theta(j, piece_count(delay_, grid_step_), grid_step_);
    }

    const NodeStore& nodes() const noexcept { return nodes_; }
    const std::vector<Vec>& values() const noexcept { return nodes_.values(); }
    const std::vector<Vec>& left_slopes() const noexcept { return nodes_.left_slopes(); }
    const std::vector<Vec>& right_slopes() const noexcept { return nodes_.right_slopes(); }

    Vec eval(double theta) const override
    {
        check_theta(theta);
        return nodes_.eval(std::clamp(theta, nodes_.front_time(), 0.0));
    }

    NodeData data_at(double theta) const
    {
        check_theta(theta);
        return nodes_.data_at(std::clamp(theta, nodes_.front_time(), 0.0), snap_tol());
    }

    const Vec& at_zero() const { return nodes_.values().back(); }

    double snap_tol() const { return 1e-9 * grid_step_; }

    static std::size_t piece_count(double delay, double grid_step)
    {
        if (!(delay > 0.0) || !(grid_step > 0.0) || !std::isfinite(delay)) {
            throw DomainError("HistoryFunction: delay and grid step must be positive");
        }
        const double ratio = delay / grid_step;
        const double rounded = std::round(ratio);
        if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
            throw DomainError("HistoryFunction: grid step must divide the delay");
        }
        return static_cast<std::size_t>(rounded);
    }

private:
    static double grid_theta(std::size_t j, std::size_t pieces, double grid_step)
    {
        return -static_cast<double>(pieces - j) * grid_step;
    }

    void check_theta(double theta) const
    {
        const double tol = 1e-12 * std::max(1.0, delay_);
        if (!(theta >= -delay_ - tol) || !(theta <= tol)) {
            throw DomainError("HistoryFunction: theta outside [-delay, 0]");
        }
    }

    double delay_;
    double grid_step_;
    NodeStore nodes_;
};

/// ‖φ‖_∞ from a refinement grid (8 points per piece) plus the interior
/// extrema of each component's cubic.
inline double sup_norm(const HistoryFunction& phi)
{
    const auto& st = phi.nodes();
    const auto& t = st.times();
    double best = 0.0;
    for (const auto& v : st.values()) {
        best = std::max(best, v.norm());
    }
    for (std::size_t k = 0; k + 1 < st.size(); ++k) {
        const double len = t[k + 1] - t[k];
        const Vec& ya = st.values()[k];
        const Vec& yb = st.values()[k + 1];
        const Vec& da = st.right_slopes()[k];
        const Vec& db = st.left_slopes()[k + 1];
        std::vector<double> probes;
        for (int r = 1; r < 8; ++r) {
            probes.push_back(r / 8.0);
        }
        for (Eigen::Index c = 0; c < ya.size(); ++c) {
            const auto cubic = detail::hermite_cubic(len, ya[c], yb[c], da[c], db[c]);
            for (double s : detail::interior_critical_points(cubic)) {
                probes.push_back(s);
            }
        }
        for (double s : probes) {
            const auto w = detail::hermite_basis(s);
            const Vec v = w.h00 * ya + (w.h10 * len) * da + w.h01 * yb + (w.h11 * len) * db;
            best = std::max(best, v.norm());
        }
    }
    return best;
}

/// Semi-norm ‖·‖_a with its sandwich constants:
/// lower·|φ(0)| <= ‖φ‖_a <= upper·‖φ‖_∞.
struct SeminormSpec {
    enum class Kind { Point, Sup, ScaledPoint };

    Kind kind = Kind::Point;
    double scale = 1.0;

    static SeminormSpec point() { return {Kind::Point, 1.0}; }
    static SeminormSpec sup() { return {Kind::Sup, 1.0}; }
    static SeminormSpec scaled_point(double c)
    {
        if (!(c > 0.0)) {
            throw ConfigError("scaled-point semi-norm needs a positive scale");
        }
        return {Kind::ScaledPoint, c};
    }

    static SeminormSpec parse(const std::string& name, double scale = 1.0)
    {
        if (name == "point") {
            return point();
        }
        if (name == "sup") {
            return sup();
        }
        if (name == "scaled-point") {
            return scaled_point(scale);
        }
        throw ConfigError("unknown semi-norm kind '" + name + "'");
    }

    std::string name() const
    {
        switch (kind) {
        case Kind::Point: return "point";
        case Kind::Sup: return "sup";
        case Kind::ScaledPoint: return "scaled-point";
        }
        return "?";
    }

    double lower() const { return kind == Kind::ScaledPoint ? scale : 1.0; }
    double upper() const { return kind == Kind::ScaledPoint ? scale : 1.0; }
};

inline double seminorm(const HistoryFunction& phi, const SeminormSpec& spec)
{
    switch (spec.kind) {
    case SeminormSpec::Kind::Point: return phi.at_zero().norm();
    case SeminormSpec::Kind::Sup: return sup_norm(phi);
    case SeminormSpec::Kind::ScaledPoint: return spec.scale * phi.at_zero().norm();
    }
    throw ConfigError("unknown semi-norm kind");
}

/// φ^{s}_{h,u}: the window shifted by h with the gap [-h,0] filled by the
/// straight line from φ(0) with the given slope (slope = f_s(φ,u)).
/// Exact on the node grid when h is a multiple of the grid step; otherwise
/// the kink at -h falls inside a piece and is smoothed by the interpolant.
inline HistoryFunction driver_extension(const HistoryFunction& phi, double h, const Vec& slope)
{
    if (!(h > 0.0) || !(h < phi.delay())) {
        throw DomainError("driver_extension: need 0 < h < delay");
    }
    if (slope.size() != phi.dim()) {
        throw DomainError("driver_extension: slope dimension mismatch");
    }
    const std::size_t count = phi.node_count();
    const double snap = phi.snap_tol();
    const Vec& x0 = phi.at_zero();
    std::vector<Vec> values;
    std::vector<Vec> left;
    std::vector<Vec> right;
    values.reserve(count);
    left.reserve(count);
    right.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        const double theta = phi.node_time(j);
        if (theta < -h - snap) {
            auto d = phi.data_at(theta + h);
            values.push_back(std::move(d.value));
            left.push_back(std::move(d.left_slope));
            right.push_back(std::move(d.right_slope));
        } else if (theta <= -h + snap) {
            values.push_back(x0);
            left.push_back(phi.left_slopes().back());
            right.push_back(slope);
        } else {
            values.push_back(x0 + (theta + h) * slope);
            left.push_back(slope);
            right.push_back(slope);
        }
    }
    return HistoryFunction(phi.delay(), phi.grid_step(), std::move(values), std::move(left),
                           std::move(right));
}

/// Solution data on [0,h] starting at the current window's right end.
using DenseSegment = NodeStore;

/// x_{t+h} from x_t and the solution on [t, t+h], resampled onto φ's grid.
inline HistoryFunction append(const HistoryFunction& phi, const DenseSegment& segment)
{
    if (segment.size() < 2 || segment.front_time() != 0.0) {
        throw DomainError("append: segment must start at 0 and have positive length");
    }
    const Vec& x0 = phi.at_zero();
    const Vec& s0 = segment.values().front();
    if (s0.size() != x0.size()) {
        throw ConsistencyError("append: dimension mismatch at the seam");
    }
    if ((s0 - x0).norm() > 1e-12 * std::max(1.0, x0.norm())) {
        throw ConsistencyError("append: segment does not start at phi(0)");
    }
    const double h = segment.back_time();
    const double snap = phi.snap_tol();
    const std::size_t count = phi.node_count();
    std::vector<Vec> values;
    std::vector<Vec> left;
    std::vector<Vec> right;
    values.reserve(count);
    left.reserve(count);
    right.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        const double t = phi.node_time(j) + h;
        if (t < -snap) {
            auto d = phi.data_at(t);
            values.push_back(std::move(d.value));
            left.push_back(std::move(d.left_slope));
            right.push_back(std::move(d.right_slope));
        } else if (t <= snap) {
            values.push_back(x0);
            left.push_back(phi.left_slopes().back());
            right.push_back(segment.right_slopes().front());
        } else {
            auto d = segment.data_at(std::min(t, h), snap);
            values.push_back(std::move(d.value));
            left.push_back(std::move(d.left_slope));
            right.push_back(std::move(d.right_slope));
        }
    }
    return HistoryFunction(phi.delay(), phi.grid_step(), std::move(values), std::move(left),
                           std::move(right));
}

/// Parameters of the random-history generator used by the property checks
/// and the falsification search.
struct HistorySampler {
    Eigen::Index dim = 1;
    double delay = 1.0;
    double grid_step = 0.01;
    double radius = 1.0;
};

namespace detail {

template <class Rng>
Vec random_in_ball(Rng& rng, Eigen::Index n, double radius)
{
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vec dir(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        dir[i] = gauss(rng);
    }
    const double norm = dir.norm();
    if (norm == 0.0) {
        return Vec::Zero(n);
    }
    return dir * (radius * std::pow(unit(rng), 1.0 / static_cast<double>(n)) / norm);
}

inline HistoryFunction scaled_to_radius(HistoryFunction phi, double radius)
{
    const double s = sup_norm(phi);
    if (s <= radius) {
        return phi;
    }
    const double f = radius / s;
    auto scale = [f](std::vector<Vec> v) {
        for (auto& x : v) {
            x *= f;
        }
        return v;
    };
    return HistoryFunction(phi.delay(), phi.grid_step(), scale(phi.values()),
                           scale(phi.left_slopes()), scale(phi.right_slopes()));
}

}  // namespace detail

/// Random history in the closed sup-ball of the given radius. Mixes constant,
/// linear, sinusoidal and smoothed random-node shapes.
template <class Rng>
HistoryFunction random_history(Rng& rng, const HistorySampler& cfg)
{
    const Eigen::Index n = cfg.dim;
    std::uniform_int_distribution<int> pick(0, 3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    switch (pick(rng)) {
    case 0:
        return HistoryFunction::constant(cfg.delay, cfg.grid_step,
                                         detail::random_in_ball(rng, n, cfg.radius));
    case 1: {
        Vec a = detail::random_in_ball(rng, n, cfg.radius);
        Vec b = detail::random_in_ball(rng, n, cfg.radius) / cfg.delay;
        return detail::scaled_to_radius(HistoryFunction::linear(cfg.delay, cfg.grid_step, a, b),
                                        cfg.radius);
    }
    case 2: {
        Vec offset = detail::random_in_ball(rng, n, 0.5 * cfg.radius);
        Vec amp = detail::random_in_ball(rng, n, 0.5 * cfg.radius);
        const double omega = 0.5 + 6.0 * unit(rng);
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        return detail::scaled_to_radius(
            HistoryFunction::sinusoid(cfg.delay, cfg.grid_step, offset, amp, omega, phase),
            cfg.radius);
    }
    default: {
        const std::size_t count = HistoryFunction::piece_count(cfg.delay, cfg.grid_step) + 1;
        std::vector<Vec> v;
        v.reserve(count);
        for (std::size_t j = 0; j < count; ++j) {
            v.push_back(detail::random_in_ball(rng, n, cfg.radius));
        }
        for (int pass = 0; pass < 3 && count > 2; ++pass) {
            std::vector<Vec> s = v;
            for (std::size_t j = 1; j + 1 < count; ++j) {
                s[j] = 0.25 * v[j - 1] + 0.5 * v[j] + 0.25 * v[j + 1];
            }
            v = std::move(s);
        }
        std::vector<Vec> d(count);
        const double hg = cfg.grid_step;
        for (std::size_t j = 0; j < count; ++j) {
            if (count == 1) {
                d[j] = Vec::Zero(n);
            } else if (j == 0) {
                d[j] = (v[1] - v[0]) / hg;
            } else if (j + 1 == count) {
                d[j] = (v[j] - v[j - 1]) / hg;
            } else {
                d[j] = (v[j + 1] - v[j - 1]) / (2 * hg);
            }
        }
        return detail::scaled_to_radius(HistoryFunction(cfg.delay, cfg.grid_step, v, d),
                                        cfg.radius);
    }
    }
}

}  // namespace rfdiss
