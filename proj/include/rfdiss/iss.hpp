#pragma once

// Verification of Lyapunov–Krasovskii certificates:
//   sandwich      α₁(|φ(0)|) <= V(φ) <= α₂(‖φ‖_a)
//   dissipation   D⁺V(t) <= -α₃(‖x_t‖_a) + α₄(|u(t)|) along solutions
// and the ISS envelope |x(t)| <= β(‖x₀‖_∞, t) + γ(‖u_[0,t)‖_∞), certified by
// randomized piecewise-constant scenarios or attacked by random search.

#include "rfdiss/comparison.hpp"
#include "rfdiss/derivatives.hpp"
#include "rfdiss/dynamics.hpp"
#include "rfdiss/history.hpp"
#include "rfdiss/signals.hpp"
#include "rfdiss/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <thread>
#include <utility>
#include <vector>

namespace rfdiss {

/// Deterministic per-trial generator: the stream depends only on (seed, index).
inline std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

/// Runs fn(i) for i in [0,n) on up to `threads` workers. Results must be
/// written to per-index slots by fn.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn)
{
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += threads) {
                    fn(i);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

// ---------------------------------------------------------------------------
// Sandwich bounds

struct SandwichViolation {
    HistoryFunction phi;
    bool lower;  ///< α₁(|φ(0)|) <= V(φ) failed (otherwise the upper bound failed)
    double lhs;
    double rhs;
};

struct SandwichReport {
    std::size_t trials = 0;
    std::size_t lower_violations = 0;
    std::size_t upper_violations = 0;
    /// min over trials of both slacks V - α₁ and α₂ - V.
    double worst_margin = std::numeric_limits<double>::infinity();
    std::vector<SandwichViolation> witnesses;

    bool passed() const { return lower_violations == 0 && upper_violations == 0; }
};

inline SandwichReport check_sandwich(const CandidateFunctional& V, const KFunction& a1,
                                     const KFunction& a2, const SeminormSpec& spec,
                                     std::size_t trials, std::uint64_t seed,
                                     const HistorySampler& sampler, std::size_t max_witnesses = 10)
{
    if (trials < 1) {
        throw DomainError("check_sandwich: need at least one trial");
    }
    constexpr double kTol = 1e-9;
    SandwichReport rep;
    rep.trials = trials;
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < trials; ++k) {
        HistoryFunction phi = random_history(rng, sampler);
        const double v = V(phi);
        const double lo = a1(phi.at_zero().norm());
        const double hi = a2(seminorm(phi, spec));
        const double lower_slack = v - lo;
        const double upper_slack = hi - v;
        rep.worst_margin = std::min({rep.worst_margin, lower_slack, upper_slack});
        const bool lower_bad = lower_slack < -kTol * std::max(1.0, std::abs(lo));
        const bool upper_bad = upper_slack < -kTol * std::max(1.0, std::abs(hi));
        if (lower_bad) {
            ++rep.lower_violations;
        }
        if (upper_bad) {
            ++rep.upper_violations;
        }
        if ((lower_bad || upper_bad) && rep.witnesses.size() < max_witnesses) {
            rep.witnesses.push_back({phi, lower_bad, lower_bad ? lo : v, lower_bad ? v : hi});
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Dissipation inequality along a solution

enum class InstantStatus { Pass, Inconclusive, Violation };

struct DissipationTolerances {
    double tol = 1e-6;
    HSequence hseq = HSequence::geometric();
    double step = 1e-3;
    double bound = kDefaultBlowUpBound;
    /// Check every `stride`-th grid point inside constancy intervals;
    /// breakpoints (left endpoints) are always checked.
    std::size_t stride = 1;
};

struct DissipationSample {
    double t;
    double estimate;   ///< D̂⁺V(t)
    double error_bar;
    double bound;      ///< -α₃(‖x_t‖_a) + α₄(|u(t)|)
    double margin;     ///< bound - estimate
    InstantStatus status;
    bool left_endpoint;
};

struct DissipationReport {
    std::vector<DissipationSample> samples;
    std::size_t pass = 0;
    std::size_t inconclusive = 0;
    std::size_t violations = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
    bool blew_up = false;
    double blowup_time = 0.0;

    std::size_t total() const { return samples.size(); }

    /// Inconclusive readings at left endpoints of constancy intervals are the
    /// measure-zero exceptions of the a.e. statement and do not fail the check.
    bool interior_inconclusive() const
    {
        return std::any_of(samples.begin(), samples.end(), [](const DissipationSample& s) {
            return s.status == InstantStatus::Inconclusive && !s.left_endpoint;
        });
    }

    bool passed() const { return violations == 0 && !blew_up && !interior_inconclusive(); }
};

inline InstantStatus classify_margin(double margin, double error_bar, double tol)
{
    if (margin >= -tol) {
        return InstantStatus::Pass;
    }
    if (margin >= -(error_bar + tol)) {
        return InstantStatus::Inconclusive;
    }
    return InstantStatus::Violation;
}

/// Integrates once and compares the Dini estimate with the dissipation bound
/// on [0,horizon]. Interior instants are used only when the two smallest
/// estimator steps stay inside the current constancy interval.
inline DissipationReport check_dissipation(const CandidateFunctional& V, const KFunction& a3,
                                           const KFunction& a4, const SystemDef& sys,
                                           const HistoryFunction& phi0, const InputSignal& u,
                                           const ModeSignal& sigma, const SeminormSpec& spec,
                                           double horizon, const DissipationTolerances& tols = {})
{
    tols.hseq.validate();
    const double reach = tols.hseq.largest();
    const Trajectory traj = integrate(sys, phi0, u, sigma, horizon + reach, tols.step, tols.bound);
    DissipationReport rep;
    double last_t = horizon;
    if (!traj.completed()) {
        rep.blew_up = true;
        rep.blowup_time = traj.end_time();
        last_t = std::min(horizon, traj.horizon() - reach);
    }
    const double snap = traj.snap_tol();
    const double near = tols.hseq.steps[tols.hseq.steps.size() - 2];
    auto is_breakpoint = [&](double t) {
        if (t <= snap) {
            return true;
        }
        for (const auto* bps : {&u.breakpoints(), &sigma.breakpoints()}) {
            const auto it = std::lower_bound(bps->begin(), bps->end(), t - snap);
            if (it != bps->end() && std::abs(*it - t) <= snap) {
                return true;
            }
        }
        return false;
    };
    const auto& times = traj.times();
    std::size_t interior_seen = 0;
    for (double t : times) {
        if (t > last_t + snap) {
            break;
        }
        const bool left = is_breakpoint(t);
        if (!left) {
            const double next = std::min(u.next_breakpoint(t), sigma.next_breakpoint(t));
            if (t + near > next - snap) {
                continue;
            }
            if (interior_seen++ % tols.stride != 0) {
                continue;
            }
        }
        const auto est = dini_along_solution(V, traj, t, tols.hseq);
        const HistoryFunction xt = state_at(traj, t);
        const double bound = -a3(seminorm(xt, spec)) + a4(u(t).norm());
        const double margin = bound - est.value;
        const auto status = classify_margin(margin, est.error_bar, tols.tol);
        switch (status) {
        case InstantStatus::Pass: ++rep.pass; break;
        case InstantStatus::Inconclusive: ++rep.inconclusive; break;
        case InstantStatus::Violation: ++rep.violations; break;
        }
        rep.worst_margin = std::min(rep.worst_margin, margin);
        rep.samples.push_back({t, est.value, est.error_bar, bound, margin, status, left});
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Random piecewise-constant scenarios

struct ScenarioSpace {
    double horizon = 10.0;
    double step = 1e-2;
    double history_grid_step = 0.1;
    std::size_t max_breakpoints = 5;
    /// Minimum dwell between breakpoints; 0 means 10·step.
    double min_dwell = 0.0;
    double input_lo = -1.0;
    double input_hi = 1.0;
    /// Allowed modes; empty means every mode of the system.
    std::vector<ModeId> modes;
    double initial_radius = 1.0;
    double bound = kDefaultBlowUpBound;

    double dwell() const { return min_dwell > 0.0 ? min_dwell : 10.0 * step; }
};

struct Scenario {
    HistoryFunction phi0;
    InputSignal u;
    ModeSignal sigma;
};

template <class Rng>
Scenario random_scenario(Rng& rng, const SystemDef& sys, const ScenarioSpace& space)
{
    std::vector<ModeId> modes = space.modes;
    if (modes.empty()) {
        for (ModeId s = 0; s < sys.mode_count(); ++s) {
            modes.push_back(s);
        }
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> count(0, space.max_breakpoints);
    std::uniform_int_distribution<std::size_t> mode_pick(0, modes.size() - 1);

    const Eigen::Index n = sys.state_dim();
    HistoryFunction phi0 = [&] {
        if (unit(rng) < 0.5) {
            return HistoryFunction::constant(sys.delay(), space.history_grid_step,
                                             detail::random_in_ball(rng, n, space.initial_radius));
        }
        Vec offset = detail::random_in_ball(rng, n, 0.5 * space.initial_radius);
        Vec amp = detail::random_in_ball(rng, n, 0.5 * space.initial_radius);
        const double omega = 0.5 + 6.0 * unit(rng);
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        return detail::scaled_to_radius(HistoryFunction::sinusoid(sys.delay(), space.history_grid_step,
                                                                  offset, amp, omega, phase),
                                        space.initial_radius);
    }();

    const std::size_t k = count(rng);
    std::vector<double> raw(k);
    for (auto& t : raw) {
        t = space.horizon * unit(rng);
    }
    std::sort(raw.begin(), raw.end());
    std::vector<double> bps{0.0};
    for (double t : raw) {
        if (t - bps.back() >= space.dwell()) {
            bps.push_back(t);
        }
    }
    std::vector<Vec> inputs;
    std::vector<ModeId> ms;
    for (std::size_t i = 0; i < bps.size(); ++i) {
        Vec v(sys.input_dim());
        for (Eigen::Index c = 0; c < v.size(); ++c) {
            v[c] = space.input_lo + (space.input_hi - space.input_lo) * unit(rng);
        }
        inputs.push_back(std::move(v));
        ms.push_back(modes[mode_pick(rng)]);
    }
    return {std::move(phi0), InputSignal(bps, std::move(inputs)), ModeSignal(bps, std::move(ms))};
}

// ---------------------------------------------------------------------------
// ISS envelope validation

struct EnvelopeCheck {
    double slack = std::numeric_limits<double>::infinity();  ///< min over grid
    double t = 0.0;                                          ///< argmin
    double x_norm = 0.0;
    double envelope = 0.0;
    bool blew_up = false;
};

/// min over grid points of β(‖x₀‖_∞,t) + γ(‖u_[0,t)‖_∞) - |x(t)|. A blow-up
/// counts as a violation at the blow-up time.
inline EnvelopeCheck envelope_slack(const Trajectory& traj, const KLFunction& beta,
                                    const KFunction& gamma)
{
    EnvelopeCheck out;
    const double r = sup_norm(traj.initial());
    const auto& times = traj.times();
    const auto& states = traj.states();
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        const double unorm = t > 0.0 ? sup_norm(traj.input(), t) : 0.0;
        const double env = beta(r, t) + gamma(unorm);
        const double xn = states[i].norm();
        const double slack = env - xn;
        if (slack < out.slack) {
            out = {slack, t, xn, env, false};
        }
    }
    if (!traj.completed()) {
        out.blew_up = true;
        out.t = traj.end_time();
        out.slack = -std::numeric_limits<double>::infinity();
    }
    return out;
}

/// Envelope slack at one grid instant t (used to re-validate counterexamples).
inline double envelope_slack_at(const Trajectory& traj, const KLFunction& beta,
                                const KFunction& gamma, double t)
{
    const double r = sup_norm(traj.initial());
    const double unorm = t > 0.0 ? sup_norm(traj.input(), t) : 0.0;
    const double env = beta(r, t) + gamma(unorm);
    if (t > traj.horizon() + traj.snap_tol()) {
        return -std::numeric_limits<double>::infinity();
    }
    return env - traj.eval(std::min(t, traj.horizon())).norm();
}

struct TrialResult {
    std::size_t index = 0;
    double slack = 0.0;
    double t = 0.0;
    double x0_norm = 0.0;
    double u_norm = 0.0;
    bool blew_up = false;
};

struct Counterexample {
    std::size_t trial = 0;
    Scenario scenario;
    double t = 0.0;
    double x_norm = 0.0;
    double envelope = 0.0;
    bool revalidated = false;
};

struct TrialPlan {
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    ScenarioSpace space;
    unsigned threads = 1;
    /// Absolute tolerance on |x| for envelope checks.
    double tol = 1e-6;
    std::size_t sandwich_trials = 200;
    /// Multiplies the state gain before validation (values < 1 shrink it).
    double gamma_scale = 1.0;
};

namespace detail {

inline TrialResult run_trial(const SystemDef& sys, const KLFunction& beta, const KFunction& gamma,
                             const ScenarioSpace& space, std::uint64_t seed, std::size_t index,
                             Scenario* keep = nullptr)
{
    auto rng = trial_rng(seed, index);
    Scenario sc = random_scenario(rng, sys, space);
    const Trajectory traj = integrate(sys, sc.phi0, sc.u, sc.sigma, space.horizon, space.step, space.bound);
    const auto env = envelope_slack(traj, beta, gamma);
    TrialResult res{index, env.slack, env.t, sup_norm(sc.phi0), sup_norm(sc.u, space.horizon), env.blew_up};
    if (keep) {
        *keep = std::move(sc);
    }
    return res;
}

/// Re-integrates at half the step and checks the violation persists at t.
inline bool revalidate(const SystemDef& sys, const KLFunction& beta, const KFunction& gamma,
                       const Scenario& sc, const ScenarioSpace& space, double t, double tol)
{
    const Trajectory fine = integrate(sys, sc.phi0, sc.u, sc.sigma, space.horizon, 0.5 * space.step, space.bound);
    if (!fine.completed() && fine.end_time() <= t + fine.snap_tol()) {
        return true;
    }
    return envelope_slack_at(fine, beta, gamma, t) < -tol;
}

}  // namespace detail

struct EnvelopeValidation {
    std::vector<TrialResult> trials;
    std::size_t violations = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    std::optional<Counterexample> counterexample;
};

/// Runs every trial of the plan against (β,γ); keeps the lowest-index
/// violating scenario as the counterexample.
inline EnvelopeValidation validate_envelope(const SystemDef& sys, const KLFunction& beta,
                                            const KFunction& gamma, const TrialPlan& plan)
{
    EnvelopeValidation out;
    out.trials.resize(plan.trials);
    parallel_for(plan.trials, plan.threads, [&](std::size_t i) {
        out.trials[i] = detail::run_trial(sys, beta, gamma, plan.space, plan.seed, i);
    });
    for (const auto& tr : out.trials) {
        out.min_slack = std::min(out.min_slack, tr.slack);
        if (tr.slack < -plan.tol) {
            ++out.violations;
            if (!out.counterexample) {
                Scenario sc{HistoryFunction::constant(1.0, 1.0, Vec::Zero(1)),
                            InputSignal::constant(Vec::Zero(1)), ModeSignal::constant(0)};
                const auto again = detail::run_trial(sys, beta, gamma, plan.space, plan.seed, tr.index, &sc);
                Counterexample cx{tr.index, std::move(sc), again.t, 0.0, 0.0, false};
                const Trajectory traj = integrate(sys, cx.scenario.phi0, cx.scenario.u, cx.scenario.sigma,
                                                  plan.space.horizon, plan.space.step, plan.space.bound);
                const auto env = envelope_slack(traj, beta, gamma);
                cx.x_norm = env.x_norm;
                cx.envelope = env.envelope;
                cx.revalidated = detail::revalidate(sys, beta, gamma, cx.scenario, plan.space, cx.t, plan.tol);
                out.counterexample = std::move(cx);
            }
        }
    }
    return out;
}

struct IssCertificateReport {
    IssGains gains;
    /// α₁⁻¹ ∘ γ (times the plan's gamma_scale): the gain on |x| used for the
    /// envelope checks.
    KFunction state_gain;
    SandwichReport sandwich;
    EnvelopeValidation validation;

    bool passed() const { return sandwich.passed() && validation.violations == 0; }
};

/// Checks the sandwich bounds, builds (β,γ) from α₁..α₄, and validates the
/// envelope on the plan's random scenarios. The trials are skipped when the
/// sandwich check fails.
inline IssCertificateReport certify(const SystemDef& sys, const CandidateFunctional& V,
                                    const KFunction& a1, const KFunction& a2, const KFunction& a3,
                                    const KFunction& a4, const SeminormSpec& spec,
                                    const TrialPlan& plan)
{
    const HistorySampler sampler{sys.state_dim(), sys.delay(), plan.space.history_grid_step,
                                 plan.space.initial_radius};
    SandwichReport sandwich = check_sandwich(V, a1, a2, spec, std::max<std::size_t>(plan.sandwich_trials, 1),
                                             plan.seed, sampler);
    IssGainOptions opt;
    opt.r_max = plan.space.initial_radius * (1.0 + 1e-9);
    opt.horizon = plan.space.horizon;
    IssGains gains = iss_gains(a1, a2, a3, a4, spec.upper(), opt);
    KFunction state_gain = scale(plan.gamma_scale, compose(inverse(a1), gains.gamma));
    IssCertificateReport rep{std::move(gains), std::move(state_gain), std::move(sandwich), {}};
    if (rep.sandwich.passed()) {
        rep.validation = validate_envelope(sys, rep.gains.beta, rep.state_gain, plan);
    }
    return rep;
}

struct FalsifyResult {
    std::size_t trials_run = 0;
    /// Results of trials 0..trials_run-1.
    std::vector<TrialResult> trials;
    std::optional<Counterexample> counterexample;

    bool found() const { return counterexample.has_value(); }
};

/// Random search for a scenario with |x(t)| > β(‖x₀‖_∞,t) + γ(‖u_[0,t)‖_∞) + tol.
/// Trials run in batches; the lowest violating index whose violation survives
/// a half-step re-integration is returned.
inline FalsifyResult falsify(const SystemDef& sys, const KLFunction& beta, const KFunction& gamma,
                             std::size_t budget, std::uint64_t seed, const ScenarioSpace& space,
                             double tol = 1e-6, unsigned threads = 1)
{
    if (budget < 1) {
        throw DomainError("falsify: budget must be at least 1");
    }
    FalsifyResult out;
    const std::size_t batch = std::max<std::size_t>(16, 4 * std::max(1u, threads));
    for (std::size_t start = 0; start < budget; start += batch) {
        const std::size_t len = std::min(batch, budget - start);
        std::vector<TrialResult> res(len);
        parallel_for(len, threads, [&](std::size_t i) {
            res[i] = detail::run_trial(sys, beta, gamma, space, seed, start + i);
        });
        for (const auto& tr : res) {
            out.trials.push_back(tr);
            if (!(tr.slack < -tol)) {
                continue;
            }
            Scenario sc{HistoryFunction::constant(1.0, 1.0, Vec::Zero(1)), InputSignal::constant(Vec::Zero(1)),
                        ModeSignal::constant(0)};
            const auto again = detail::run_trial(sys, beta, gamma, space, seed, tr.index, &sc);
            if (!detail::revalidate(sys, beta, gamma, sc, space, again.t, tol)) {
                continue;
            }
            const Trajectory traj = integrate(sys, sc.phi0, sc.u, sc.sigma, space.horizon, space.step, space.bound);
            const auto env = envelope_slack(traj, beta, gamma);
            out.trials_run = tr.index + 1;
            out.counterexample = Counterexample{tr.index, std::move(sc), again.t, env.x_norm, env.envelope, true};
            return out;
        }
    }
    out.trials_run = budget;
    return out;
}

}  // namespace rfdiss
