#pragma once

// Numerical estimates of the five derivative notions of a functional V along
// the switched system:
//   D1  Driver form      sup_s limsup (V(φ^{s}_{h,u}) - V(φ)) / h
//   D2  Dini             limsup (V(x_{t+h}) - V(x_t)) / h along a solution
//   D3  S-Dini           limsup (V(x_h(φ,u,σ)) - V(φ)) / h
//   D4  mode-Dini        D3 with u ≡ v, σ ≡ s
//   D5  sup-mode-Dini    sup_s D4
// Each limsup is realized on a finite decreasing step sequence and
// extrapolated from the last two quotients.

#include "rfdiss/dynamics.hpp"
#include "rfdiss/errors.hpp"
#include "rfdiss/history.hpp"
#include "rfdiss/signals.hpp"
#include "rfdiss/solver.hpp"
#include "rfdiss/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace rfdiss {

/// Candidate Lyapunov–Krasovskii functional V : C → R₊.
struct CandidateFunctional {
    std::function<double(const HistoryFunction&)> fn;
    bool lipschitz_on_bounded = false;
    std::string description;

    double operator()(const HistoryFunction& phi) const
    {
        const double v = fn(phi);
        if (!std::isfinite(v)) {
            throw NumericError("functional '" + description + "' returned a non-finite value");
        }
        return v;
    }

    /// V(φ) = φ(0)ᵀ P φ(0), P symmetric positive definite.
    static CandidateFunctional point_quadratic(const Mat& P)
    {
        return integral_quadratic(P, Mat::Zero(P.rows(), P.cols()));
    }

    /// V(φ) = φ(0)ᵀ P φ(0) + ∫_{-Δ}^{0} φ(τ)ᵀ Q φ(τ) dτ, with three-point Gauss
    /// quadrature on each interpolation piece.
    static CandidateFunctional integral_quadratic(const Mat& P, const Mat& Q)
    {
        if (P.rows() != P.cols() || Q.rows() != P.rows() || Q.cols() != P.cols()) {
            throw ConfigError("quadratic functional: P and Q must be square and equal-sized");
        }
        if (!P.isApprox(P.transpose()) || !Q.isApprox(Q.transpose(), 1e-12)) {
            throw ConfigError("quadratic functional: P and Q must be symmetric");
        }
        Eigen::SelfAdjointEigenSolver<Mat> ep(P);
        if (!(ep.eigenvalues().minCoeff() > 0.0)) {
            throw ConfigError("quadratic functional: P must be positive definite");
        }
        const bool has_integral = !Q.isZero(0.0);
        if (has_integral) {
            Eigen::SelfAdjointEigenSolver<Mat> eq(Q);
            if (eq.eigenvalues().minCoeff() < 0.0) {
                throw ConfigError("quadratic functional: Q must be positive semi-definite");
            }
        }
        auto fn = [P, Q, has_integral](const HistoryFunction& phi) {
            if (phi.dim() != P.rows()) {
                throw ConfigError("quadratic functional: dimension mismatch");
            }
            const Vec& x0 = phi.at_zero();
            double v = x0.dot(P * x0);
            if (has_integral) {
                static constexpr std::array<double, 3> gx{-0.7745966692414834, 0.0,
                                                          0.7745966692414834};
                static constexpr std::array<double, 3> gw{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
                const auto& st = phi.nodes();
                const auto& t = st.times();
                double acc = 0.0;
                for (std::size_t k = 0; k + 1 < st.size(); ++k) {
                    const double len = t[k + 1] - t[k];
                    for (std::size_t q = 0; q < 3; ++q) {
                        const double tau = t[k] + 0.5 * len * (gx[q] + 1.0);
                        const Vec y = detail::hermite_value(t[k], t[k + 1], st.values()[k],
                                                            st.values()[k + 1], st.right_slopes()[k],
                                                            st.left_slopes()[k + 1], tau);
                        acc += 0.5 * len * gw[q] * y.dot(Q * y);
                    }
                }
                v += acc;
            }
            return v;
        };
        return {std::move(fn), true, has_integral ? "integral-quadratic" : "point-quadratic"};
    }

    static CandidateFunctional zero()
    {
        return {[](const HistoryFunction&) { return 0.0; }, true, "zero"};
    }
};

/// Decreasing positive steps h₁ > … > h_K standing in for h → 0⁺.
struct HSequence {
    std::vector<double> steps;

    /// h_j = h0·2^{-j}, j = 0..levels-1.
    static HSequence geometric(double h0 = 0.1, int levels = 8)
    {
        if (!(h0 > 0.0) || levels < 2) {
            throw DomainError("HSequence: need h0 > 0 and at least two levels");
        }
        HSequence out;
        for (int j = 0; j < levels; ++j) {
            out.steps.push_back(std::ldexp(h0, -j));
        }
        return out;
    }

    void validate() const
    {
        if (steps.size() < 2) {
            throw DomainError("HSequence: need at least two steps");
        }
        for (std::size_t j = 0; j < steps.size(); ++j) {
            if (!(steps[j] > 0.0) || (j > 0 && !(steps[j] < steps[j - 1]))) {
                throw DomainError("HSequence: steps must be positive and strictly decreasing");
            }
        }
    }

    double largest() const { return steps.front(); }
    double smallest() const { return steps.back(); }
};

struct DerivativeEstimate {
    double value = 0.0;
    /// |q_K - q_{K-1}|: a crude bound on the extrapolation error.
    double error_bar = 0.0;
    std::vector<double> quotients;
};

/// Linear-in-h Richardson extrapolation on the last two quotients.
inline DerivativeEstimate extrapolate(const HSequence& hseq, std::vector<double> quotients)
{
    const std::size_t K = quotients.size();
    const double ha = hseq.steps[K - 2];
    const double hb = hseq.steps[K - 1];
    const double qa = quotients[K - 2];
    const double qb = quotients[K - 1];
    DerivativeEstimate out;
    out.value = (ha * qb - hb * qa) / (ha - hb);
    out.error_bar = std::abs(qb - qa);
    out.quotients = std::move(quotients);
    return out;
}

/// Largest solver step <= h_K/10 that divides the history grid step.
inline double default_estimator_step(const HistoryFunction& phi, const HSequence& hseq)
{
    const double target = hseq.smallest() / 10.0;
    const double ratio = std::ceil(phi.grid_step() / target - 1e-9);
    return phi.grid_step() / std::max(ratio, 1.0);
}

/// Driver quotients for a single mode s.
inline DerivativeEstimate driver_derivative_mode(const CandidateFunctional& V, const SystemDef& sys,
                                                 const HistoryFunction& phi, const Vec& u, ModeId s,
                                                 const HSequence& hseq)
{
    hseq.validate();
    const Vec slope = eval_field(sys, s, phi, u);
    const double v0 = V(phi);
    std::vector<double> q;
    q.reserve(hseq.steps.size());
    for (double h : hseq.steps) {
        q.push_back((V(driver_extension(phi, h, slope)) - v0) / h);
    }
    return extrapolate(hseq, std::move(q));
}

/// D1: max over modes of the per-mode Driver estimates.
inline DerivativeEstimate driver_derivative(const CandidateFunctional& V, const SystemDef& sys,
                                            const HistoryFunction& phi, const Vec& u,
                                            const HSequence& hseq)
{
    DerivativeEstimate best;
    for (ModeId s = 0; s < sys.mode_count(); ++s) {
        auto e = driver_derivative_mode(V, sys, phi, u, s, hseq);
        if (s == 0 || e.value > best.value) {
            best = std::move(e);
        }
    }
    return best;
}

/// D2 at time t along an already computed trajectory.
inline DerivativeEstimate dini_along_solution(const CandidateFunctional& V, const Trajectory& traj,
                                              double t, const HSequence& hseq)
{
    hseq.validate();
    if (!(t >= 0.0) || t + hseq.largest() > traj.horizon() + traj.snap_tol()) {
        throw DomainError("dini_along_solution: t + h1 exceeds the trajectory horizon");
    }
    const double v0 = V(state_at(traj, t));
    std::vector<double> q;
    q.reserve(hseq.steps.size());
    for (double h : hseq.steps) {
        q.push_back((V(state_at(traj, t + h)) - v0) / h);
    }
    return extrapolate(hseq, std::move(q));
}

/// D3: integrate once on [0,h₁] and difference V along the solution.
/// Throws NumericError when the solution blows up before h₁.
inline DerivativeEstimate s_dini(const CandidateFunctional& V, const SystemDef& sys,
                                 const HistoryFunction& phi, const InputSignal& u,
                                 const ModeSignal& sigma, const HSequence& hseq, double step = 0.0)
{
    hseq.validate();
    if (step <= 0.0) {
        step = default_estimator_step(phi, hseq);
    }
    const Trajectory traj = integrate(sys, phi, u, sigma, hseq.largest(), step);
    if (!traj.completed()) {
        throw NumericError("s_dini: solution blew up before h1");
    }
    return dini_along_solution(V, traj, 0.0, hseq);
}

/// D4: S-Dini with u ≡ v and σ ≡ s.
inline DerivativeEstimate mode_dini(const CandidateFunctional& V, const SystemDef& sys,
                                    const HistoryFunction& phi, const Vec& v, ModeId s,
                                    const HSequence& hseq, double step = 0.0)
{
    return s_dini(V, sys, phi, InputSignal::constant(v), ModeSignal::constant(s), hseq, step);
}

/// D5: max over modes of D4.
inline DerivativeEstimate sup_mode_dini(const CandidateFunctional& V, const SystemDef& sys,
                                        const HistoryFunction& phi, const Vec& v,
                                        const HSequence& hseq, double step = 0.0)
{
    DerivativeEstimate best;
    for (ModeId s = 0; s < sys.mode_count(); ++s) {
        auto e = mode_dini(V, sys, phi, v, s, hseq, step);
        if (s == 0 || e.value > best.value) {
            best = std::move(e);
        }
    }
    return best;
}

}  // namespace rfdiss
