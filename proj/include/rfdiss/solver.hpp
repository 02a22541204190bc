#pragma once

// Method-of-steps integration of ẋ(t) = f_{σ(t)}(x_t, u(t)) with the classical
// four-stage Runge-Kutta scheme and cubic Hermite dense output.
//
// The integration grid is the lattice {i·step} ∩ [0,T] merged with every
// breakpoint of u and σ, so both signals are constant on each step. Delayed
// arguments are read from the dense output of everything computed so far;
// when a stage needs the solution inside the current step (lags shorter than
// the step) it uses the chord from x(t_n) to the stage value.

#include "rfdiss/dynamics.hpp"
#include "rfdiss/errors.hpp"
#include "rfdiss/hermite.hpp"
#include "rfdiss/history.hpp"
#include "rfdiss/signals.hpp"
#include "rfdiss/types.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

namespace rfdiss {

inline constexpr double kDefaultBlowUpBound = 1e6;

enum class TrajectoryStatus { Completed, BlowUp };

class Trajectory {
public:
    Trajectory(HistoryFunction initial, InputSignal input, ModeSignal switching, double step,
               double bound)
        : initial_(std::move(initial)), input_(std::move(input)), switching_(std::move(switching)),
          step_(step), bound_(bound)
    {
    }

    TrajectoryStatus status() const noexcept { return status_; }
    bool completed() const noexcept { return status_ == TrajectoryStatus::Completed; }
    /// T for a completed run; the first time |x| exceeded the bound otherwise.
    double end_time() const noexcept { return end_time_; }
    /// Last time with stored solution data.
    double horizon() const { return solution_.back_time(); }
    double bound() const noexcept { return bound_; }
    double step() const noexcept { return step_; }

    const HistoryFunction& initial() const noexcept { return initial_; }
    const InputSignal& input() const noexcept { return input_; }
    const ModeSignal& switching() const noexcept { return switching_; }

    /// Grid τ₀ = 0 < τ₁ < … with states and one-sided slopes.
    const NodeStore& solution() const noexcept { return solution_; }
    const std::vector<double>& times() const noexcept { return solution_.times(); }
    const std::vector<Vec>& states() const noexcept { return solution_.values(); }

    double snap_tol() const { return 1e-9 * std::min(step_, initial_.grid_step()); }

    /// x(t) for t ∈ [-Δ, horizon].
    Vec eval(double t) const
    {
        if (t < 0.0) {
            return initial_.eval(std::max(t, -initial_.delay()));
        }
        return solution_.eval(t);
    }

    NodeData data_at(double t) const
    {
        const double snap = snap_tol();
        if (t < -snap) {
            return initial_.data_at(std::max(t, -initial_.delay()));
        }
        if (t <= snap) {
            return {initial_.at_zero(), initial_.left_slopes().back(),
                    solution_.right_slopes().front()};
        }
        return solution_.data_at(t, snap);
    }

private:
    friend Trajectory integrate(const SystemDef&, const HistoryFunction&, const InputSignal&,
                                const ModeSignal&, double, double, double);

    HistoryFunction initial_;
    InputSignal input_;
    ModeSignal switching_;
    double step_;
    double bound_;
    NodeStore solution_;
    TrajectoryStatus status_ = TrajectoryStatus::Completed;
    double end_time_ = 0.0;
};

namespace detail {

/// Window x_{t_c} during a stage at t_c = t_n + c·h, with stage value Y.
class StageWindow final : public History {
public:
    StageWindow(const Trajectory& traj, const NodeStore& sol, double t_n, double t_c,
                const Vec& x_n, const Vec& y)
        : traj_(traj), sol_(sol), t_n_(t_n), t_c_(t_c), x_n_(x_n), y_(y)
    {
    }

    double delay() const override { return traj_.initial().delay(); }
    Eigen::Index dim() const override { return x_n_.size(); }

    Vec eval(double theta) const override
    {
        const double s = t_c_ + theta;
        if (s > t_n_) {
            return x_n_ + ((s - t_n_) / (t_c_ - t_n_)) * (y_ - x_n_);
        }
        if (s < 0.0) {
            const double d = traj_.initial().delay();
            return traj_.initial().eval(std::max(s, -d));
        }
        return sol_.eval(s);
    }

private:
    const Trajectory& traj_;
    const NodeStore& sol_;
    double t_n_;
    double t_c_;
    const Vec& x_n_;
    const Vec& y_;
};

/// Lattice points i·step in [0,T] merged with the breakpoints in (0,T).
inline std::vector<double> integration_grid(double T, double step,
                                            const std::vector<double>& breakpoints)
{
    const double merge = 1e-9 * step;
    std::vector<double> lattice;
    const auto count = static_cast<std::size_t>(std::floor(T / step + 1e-9));
    for (std::size_t i = 0; i <= count; ++i) {
        lattice.push_back(std::min(static_cast<double>(i) * step, T));
    }
    if (T - lattice.back() > merge) {
        lattice.push_back(T);
    } else {
        lattice.back() = T;
    }
    std::vector<double> bps;
    for (double b : breakpoints) {
        if (b > merge && b < T - merge) {
            bps.push_back(b);
        }
    }
    std::sort(bps.begin(), bps.end());
    std::vector<double> out;
    out.reserve(lattice.size() + bps.size());
    std::size_t j = 0;
    for (double t : lattice) {
        while (j < bps.size() && bps[j] < t - merge) {
            if (out.empty() || bps[j] - out.back() > merge) {
                out.push_back(bps[j]);
            }
            ++j;
        }
        if (j < bps.size() && std::abs(bps[j] - t) <= merge) {
            // breakpoints win over lattice points so the signal switch lands exactly
            if (out.empty() || bps[j] - out.back() > merge) {
                out.push_back(bps[j]);
            }
            ++j;
            continue;
        }
        if (out.empty() || t - out.back() > merge) {
            out.push_back(t);
        }
    }
    return out;
}

}  // namespace detail

/// Integrates Σ on [0,T]. `step` must divide the history grid step of φ0.
/// Stops with BlowUp at the first grid time where |x| > bound or the field
/// produces non-finite values.
inline Trajectory integrate(const SystemDef& sys, const HistoryFunction& phi0,
                            const InputSignal& u, const ModeSignal& sigma, double T, double step,
                            double bound = kDefaultBlowUpBound)
{
    if (!(T > 0.0) || !(step > 0.0)) {
        throw DomainError("integrate: horizon and step must be positive");
    }
    const double ratio = phi0.grid_step() / step;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio) || std::round(ratio) < 1) {
        throw DomainError("integrate: step must divide the history grid step");
    }
    if (std::abs(phi0.delay() - sys.delay()) > 1e-12 * sys.delay()) {
        throw ConfigError("integrate: history delay differs from the system delay");
    }
    if (phi0.dim() != sys.state_dim()) {
        throw ConfigError("integrate: history dimension differs from the state dimension");
    }
    for (const auto& v : u.values()) {
        if (v.size() != sys.input_dim()) {
            throw ConfigError("integrate: input dimension mismatch");
        }
    }
    for (ModeId s : sigma.values()) {
        if (s >= sys.mode_count()) {
            throw ConfigError("integrate: switching signal references an unknown mode");
        }
    }
    if (!(bound > sup_norm(phi0))) {
        throw DomainError("integrate: blow-up bound must exceed the initial sup-norm");
    }

    Trajectory traj(phi0, u, sigma, step, bound);
    std::vector<double> bps = u.breakpoints();
    bps.insert(bps.end(), sigma.breakpoints().begin(), sigma.breakpoints().end());
    const std::vector<double> grid = detail::integration_grid(T, step, bps);

    NodeStore& sol = traj.solution_;
    sol.reserve(grid.size());
    sol.push_back(0.0, phi0.at_zero(), phi0.left_slopes().back(), phi0.left_slopes().back());
    traj.end_time_ = T;

    auto field = [&](ModeId s, const History& w, const Vec& v) { return eval_field(sys, s, w, v); };

    std::optional<std::pair<ModeId, Vec>> prev_signals;
    Vec prev_end_slope;
    for (std::size_t n = 0; n + 1 < grid.size(); ++n) {
        const double t0 = grid[n];
        const double t1 = grid[n + 1];
        const double h = t1 - t0;
        const double mid = 0.5 * (t0 + t1);
        const ModeId s = sigma(mid);
        const Vec& v = u(mid);
        const Vec x0 = sol.values().back();
        try {
            Vec k1;
            if (prev_signals && prev_signals->first == s && prev_signals->second == v) {
                k1 = prev_end_slope;
            } else {
                k1 = field(s, detail::StageWindow(traj, sol, t0, t0, x0, x0), v);
            }
            sol.right_slope(n) = k1;
            const Vec y2 = x0 + (0.5 * h) * k1;
            const Vec k2 = field(s, detail::StageWindow(traj, sol, t0, t0 + 0.5 * h, x0, y2), v);
            const Vec y3 = x0 + (0.5 * h) * k2;
            const Vec k3 = field(s, detail::StageWindow(traj, sol, t0, t0 + 0.5 * h, x0, y3), v);
            const Vec y4 = x0 + h * k3;
            const Vec k4 = field(s, detail::StageWindow(traj, sol, t0, t1, x0, y4), v);
            const Vec x1 = x0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!x1.allFinite()) {
                throw NumericError("integrate: non-finite state");
            }
            // Left slope at t1 on the chord-extended window; the dense piece on
            // [t0,t1] does not exist yet.
            Vec kend = field(s, detail::StageWindow(traj, sol, t0, t1, x0, x1), v);
            sol.push_back(t1, x1, kend, kend);
            prev_signals.emplace(s, v);
            prev_end_slope = std::move(kend);
            if (x1.norm() > bound) {
                traj.status_ = TrajectoryStatus::BlowUp;
                traj.end_time_ = t1;
                return traj;
            }
        } catch (const NumericError&) {
            traj.status_ = TrajectoryStatus::BlowUp;
            traj.end_time_ = t1;
            return traj;
        }
    }
    // right slope at T is undefined past the horizon; keep the left one
    return traj;
}

/// The window x_t assembled from φ0 and the dense output, on φ0's grid.
inline HistoryFunction state_at(const Trajectory& traj, double t)
{
    const double tol = traj.snap_tol();
    if (!(t >= -tol) || t > traj.horizon() + tol) {
        throw DomainError("state_at: time outside the computed trajectory");
    }
    t = std::clamp(t, 0.0, traj.horizon());
    const HistoryFunction& phi0 = traj.initial();
    if (t == 0.0) {
        return phi0;
    }
    const std::size_t count = phi0.node_count();
    std::vector<Vec> values;
    std::vector<Vec> left;
    std::vector<Vec> right;
    values.reserve(count);
    left.reserve(count);
    right.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        auto d = traj.data_at(t + phi0.node_time(j));
        values.push_back(std::move(d.value));
        left.push_back(std::move(d.left_slope));
        right.push_back(std::move(d.right_slope));
    }
    return HistoryFunction(phi0.delay(), phi0.grid_step(), std::move(values), std::move(left),
                           std::move(right));
}

/// max over the grid of |x(t,φ) - x(t,ψ)|, or nullopt when either run blows up.
inline std::optional<double> continuous_dependence_check(const SystemDef& sys,
                                                         const HistoryFunction& phi,
                                                         const HistoryFunction& psi,
                                                         const InputSignal& u,
                                                         const ModeSignal& sigma, double horizon,
                                                         double step,
                                                         double bound = kDefaultBlowUpBound)
{
    const Trajectory a = integrate(sys, phi, u, sigma, horizon, step, bound);
    const Trajectory b = integrate(sys, psi, u, sigma, horizon, step, bound);
    if (!a.completed() || !b.completed()) {
        return std::nullopt;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.states().size(); ++i) {
        worst = std::max(worst, (a.states()[i] - b.states()[i]).norm());
    }
    return worst;
}

}  // namespace rfdiss
