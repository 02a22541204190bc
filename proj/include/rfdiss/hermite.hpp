#pragma once

// Cubic Hermite pieces and a non-uniform node store with one-sided slopes.
// Both history windows and trajectories are stored this way: derivative
// jumps (signal breakpoints, Driver-extension kinks) sit on nodes, and each
// node keeps the slope seen from the left and from the right.

#include "rfdiss/errors.hpp"
#include "rfdiss/types.hpp"

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

namespace rfdiss {

namespace detail {

struct HermiteBasis {
    double h00, h10, h01, h11;
};

inline HermiteBasis hermite_basis(double s)
{
    const double s2 = s * s;
    const double s3 = s2 * s;
    return {2 * s3 - 3 * s2 + 1, s3 - 2 * s2 + s, -2 * s3 + 3 * s2, s3 - s2};
}

inline HermiteBasis hermite_basis_derivative(double s)
{
    const double s2 = s * s;
    return {6 * s2 - 6 * s, 3 * s2 - 4 * s + 1, -6 * s2 + 6 * s, 3 * s2 - 2 * s};
}

/// Value at t ∈ [a,b] of the cubic with values ya,yb and slopes da,db.
inline Vec hermite_value(double a, double b, const Vec& ya, const Vec& yb, const Vec& da,
                         const Vec& db, double t)
{
    const double len = b - a;
    const double s = (t - a) / len;
    const auto w = hermite_basis(s);
    return w.h00 * ya + (w.h10 * len) * da + w.h01 * yb + (w.h11 * len) * db;
}

inline Vec hermite_slope(double a, double b, const Vec& ya, const Vec& yb, const Vec& da,
                         const Vec& db, double t)
{
    const double len = b - a;
    const double s = (t - a) / len;
    const auto w = hermite_basis_derivative(s);
    return (w.h00 / len) * ya + w.h10 * da + (w.h01 / len) * yb + w.h11 * db;
}

/// Scalar Hermite cubic in the unit variable s: coefficients c0 + c1 s + c2 s² + c3 s³.
struct Cubic {
    double c0, c1, c2, c3;
    double operator()(double s) const { return ((c3 * s + c2) * s + c1) * s + c0; }
};

inline Cubic hermite_cubic(double len, double ya, double yb, double da, double db)
{
    return {ya, len * da, -3 * ya - 2 * len * da + 3 * yb - len * db,
            2 * ya + len * da - 2 * yb + len * db};
}

/// Critical points of the cubic inside (0,1).
inline std::vector<double> interior_critical_points(const Cubic& c)
{
    std::vector<double> out;
    const double qa = 3 * c.c3;
    const double qb = 2 * c.c2;
    const double qc = c.c1;
    auto keep = [&](double s) {
        if (s > 0.0 && s < 1.0) {
            out.push_back(s);
        }
    };
    if (std::abs(qa) < 1e-300) {
        if (std::abs(qb) > 1e-300) {
            keep(-qc / qb);
        }
        return out;
    }
    const double disc = qb * qb - 4 * qa * qc;
    if (disc < 0) {
        return out;
    }
    const double sq = std::sqrt(disc);
    const double q = -0.5 * (qb + (qb >= 0 ? sq : -sq));
    if (q != 0.0) {
        keep(q / qa);
        keep(qc / q);
    } else {
        keep(0.0);
    }
    return out;
}

}  // namespace detail

/// Value and one-sided slopes at an instant.
struct NodeData {
    Vec value;
    Vec left_slope;
    Vec right_slope;
};

/// Strictly increasing time nodes with values and one-sided slopes, read
/// through piecewise cubic Hermite interpolation.
class NodeStore {
public:
    NodeStore() = default;

    void push_back(double t, Vec value, Vec left_slope, Vec right_slope)
    {
        if (!times_.empty() && !(t > times_.back())) {
            throw DomainError("NodeStore: times must be strictly increasing");
        }
        times_.push_back(t);
        values_.push_back(std::move(value));
        left_.push_back(std::move(left_slope));
        right_.push_back(std::move(right_slope));
    }

    void reserve(std::size_t n)
    {
        times_.reserve(n);
        values_.reserve(n);
        left_.reserve(n);
        right_.reserve(n);
    }

    std::size_t size() const noexcept { return times_.size(); }
    bool empty() const noexcept { return times_.empty(); }
    double front_time() const { return times_.front(); }
    double back_time() const { return times_.back(); }

    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<Vec>& values() const noexcept { return values_; }
    const std::vector<Vec>& left_slopes() const noexcept { return left_; }
    const std::vector<Vec>& right_slopes() const noexcept { return right_; }

    Vec& right_slope(std::size_t i) { return right_[i]; }

    /// Node index k with times[k] <= t < times[k+1], clamped to a valid piece.
    std::size_t piece(double t) const
    {
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - times_.begin() - 1, 0));
        return std::min(k, times_.size() - 2);
    }

    Vec eval(double t) const
    {
        check_range(t);
        if (times_.size() == 1) {
            return values_.front();
        }
        const std::size_t k = piece(t);
        if (t == times_[k]) {
            return values_[k];
        }
        if (t == times_[k + 1]) {
            return values_[k + 1];
        }
        return detail::hermite_value(times_[k], times_[k + 1], values_[k], values_[k + 1],
                                     right_[k], left_[k + 1], t);
    }

    /// Value and one-sided slopes at t; nodes within `snap` of t are used as-is.
    NodeData data_at(double t, double snap) const
    {
        check_range(t);
        const auto it = std::lower_bound(times_.begin(), times_.end(), t - snap);
        if (it != times_.end() && std::abs(*it - t) <= snap) {
            const auto i = static_cast<std::size_t>(it - times_.begin());
            return {values_[i], left_[i], right_[i]};
        }
        const std::size_t k = piece(t);
        Vec d = detail::hermite_slope(times_[k], times_[k + 1], values_[k], values_[k + 1],
                                      right_[k], left_[k + 1], t);
        return {detail::hermite_value(times_[k], times_[k + 1], values_[k], values_[k + 1],
                                      right_[k], left_[k + 1], t),
                d, d};
    }

private:
    void check_range(double t) const
    {
        if (times_.empty()) {
            throw DomainError("NodeStore: empty");
        }
        const double tol = 1e-12 * std::max(1.0, std::abs(times_.back()));
        if (!(t >= times_.front() - tol) || !(t <= times_.back() + tol)) {
            throw DomainError("NodeStore: time outside stored range");
        }
    }

    std::vector<double> times_;
    std::vector<Vec> values_;
    std::vector<Vec> left_;
    std::vector<Vec> right_;
};

}  // namespace rfdiss
