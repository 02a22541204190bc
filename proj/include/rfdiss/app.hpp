#pragma once

// Command dispatch for the rfdiss front end. Each command reads one config,
// writes its artifacts to the output directory and returns an exit status.

#include "rfdiss/io/config.hpp"
#include "rfdiss/io/csv.hpp"
#include "rfdiss/iss.hpp"

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace rfdiss {

enum ExitStatus : int { kExitPass = 0, kExitViolation = 1, kExitConfig = 2, kExitNumeric = 3 };

struct RunOptions {
    std::filesystem::path config;
    std::filesystem::path out_dir = ".";
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    bool quiet = false;
    bool emit_plot_data = false;
};

namespace app {

using io::fmt;
using io::json;

struct Context {
    const RunOptions& opt;
    io::ExperimentConfig cfg;
    std::ostringstream summary;

    std::filesystem::path out(const std::string& name) const { return opt.out_dir / name; }

    std::uint64_t seed(const json& block) const
    {
        if (opt.seed) {
            return *opt.seed;
        }
        return io::detail::get_or<std::uint64_t>(block, "seed", 1, "seed");
    }

    void write(const std::string& name, const std::string& content) const { io::write_atomic(out(name), content); }

    void finish(const std::string& summary_file = "")
    {
        if (!summary_file.empty()) {
            write(summary_file, summary.str());
        }
        if (!opt.quiet) {
            std::cout << summary.str();
        }
    }
};

inline const HistoryFunction& need_history(const Context& ctx)
{
    if (!ctx.cfg.history) {
        throw ConfigError("this command needs a 'history' block");
    }
    return *ctx.cfg.history;
}

inline const CandidateFunctional& need_functional(const Context& ctx)
{
    if (!ctx.cfg.functional) {
        throw ConfigError("this command needs a 'functional' block");
    }
    return *ctx.cfg.functional;
}

inline const io::Alphas& need_alphas(const Context& ctx)
{
    if (!ctx.cfg.alphas) {
        throw ConfigError("this command needs a 'k_functions' block with alpha1..alpha4");
    }
    return *ctx.cfg.alphas;
}

inline HSequence parse_hseq(const json& block)
{
    const double h0 = io::detail::get_or(block, "h0", 0.1, "h0");
    const int levels = io::detail::get_or(block, "levels", 8, "levels");
    try {
        return HSequence::geometric(h0, levels);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
}

/// Envelope from the config's "envelope" block, else derived from k_functions.
inline std::optional<io::Envelope> config_envelope(const Context& ctx, double r_max, double horizon)
{
    if (const json* e = ctx.cfg.block("envelope")) {
        return io::parse_envelope(*e, ctx.cfg, r_max, horizon);
    }
    if (ctx.cfg.alphas) {
        return io::parse_envelope(json{{"kind", "derived"}}, ctx.cfg, r_max, horizon);
    }
    return std::nullopt;
}

inline Trajectory simulate_config(const Context& ctx)
{
    const auto& c = ctx.cfg;
    return integrate(c.system, need_history(ctx), c.input, c.switching, c.solver.horizon, c.solver.step,
                     c.solver.bound);
}

inline void write_plot(const Context& ctx, const Trajectory& traj, const std::string& name)
{
    auto env = config_envelope(ctx, sup_norm(traj.initial()), ctx.cfg.solver.horizon);
    if (!env) {
        throw ConfigError("--emit-plot-data needs an 'envelope' or 'k_functions' block");
    }
    ctx.write(name, io::plot_csv(traj, env->beta, env->gamma));
}

inline int cmd_simulate(Context& ctx)
{
    const Trajectory traj = simulate_config(ctx);
    ctx.write("trajectory.csv", io::trajectory_csv(traj, ctx.cfg.system));
    if (ctx.opt.emit_plot_data) {
        write_plot(ctx, traj, "plot.csv");
    }
    auto& s = ctx.summary;
    s << "system: " << ctx.cfg.system.name() << "\n";
    s << "steps: " << traj.times().size() - 1 << "\n";
    if (traj.completed()) {
        s << "status: completed\n";
        s << "|x(T)|: " << fmt(traj.states().back().norm()) << "\n";
    } else {
        s << "status: blow-up at t = " << fmt(traj.end_time()) << "\n";
    }
    ctx.finish();
    return traj.completed() ? kExitPass : kExitNumeric;
}

inline int cmd_derive(Context& ctx)
{
    const auto& c = ctx.cfg;
    const auto& V = need_functional(ctx);
    const auto& phi = need_history(ctx);
    const json block = c.command("derive");
    const HSequence hseq = parse_hseq(block);
    const Vec v = block.contains("input") ? io::detail::vector(block.at("input"), "derive.input") : c.input(0.0);
    if (v.size() != c.system.input_dim()) {
        throw ConfigError("derive.input: wrong dimension");
    }
    const double step = io::detail::get_or(block, "step", 0.0, "derive");

    std::vector<io::DerivativeRow> rows;
    for (ModeId s = 0; s < c.system.mode_count(); ++s) {
        rows.push_back({c.system.modes()[s], driver_derivative_mode(V, c.system, phi, v, s, hseq), "D1"});
    }
    rows.push_back({"max", driver_derivative(V, c.system, phi, v, hseq), "D1"});

    std::vector<double> times;
    if (block.contains("times")) {
        times = io::detail::numbers(block.at("times"), "derive.times");
    }
    if (!times.empty()) {
        const double last = *std::max_element(times.begin(), times.end());
        const Trajectory traj =
            integrate(c.system, phi, c.input, c.switching, last + hseq.largest(), c.solver.step, c.solver.bound);
        if (!traj.completed()) {
            throw NumericError("derive: solution blew up at t = " + fmt(traj.end_time()));
        }
        for (double t : times) {
            rows.push_back({fmt(t), dini_along_solution(V, traj, t, hseq), "D2"});
        }
    }

    rows.push_back({"signals", s_dini(V, c.system, phi, c.input, c.switching, hseq, step), "D3"});
    for (ModeId s = 0; s < c.system.mode_count(); ++s) {
        rows.push_back({c.system.modes()[s], mode_dini(V, c.system, phi, v, s, hseq, step), "D4"});
    }
    rows.push_back({"max", sup_mode_dini(V, c.system, phi, v, hseq, step), "D5"});
    ctx.write("derivatives.csv", io::derivative_csv(rows));

    for (const auto& r : rows) {
        ctx.summary << r.notion << " " << r.key << ": " << fmt(r.estimate.value) << " +- "
                    << fmt(r.estimate.error_bar) << "\n";
    }
    ctx.finish();
    return kExitPass;
}

inline int cmd_check(Context& ctx)
{
    const auto& c = ctx.cfg;
    const json block = c.command("check");
    const bool lyapunov = c.functional.has_value() && c.alphas.has_value();
    const bool envelope = c.block("envelope") != nullptr;
    if (!lyapunov && !envelope) {
        throw ConfigError("check needs functional + k_functions blocks or an envelope block");
    }
    const auto& phi = need_history(ctx);
    auto& s = ctx.summary;
    bool failed = false;
    bool blew_up = false;

    if (lyapunov) {
        const auto& a = need_alphas(ctx);
        const auto& V = need_functional(ctx);
        const std::size_t trials = io::detail::get_or<std::size_t>(block, "sandwich_trials", 1000, "check");
        const double radius = io::detail::get_or(block, "sandwich_radius", std::max(1.0, sup_norm(phi)), "check");
        const HistorySampler sampler{c.system.state_dim(), c.system.delay(), phi.grid_step(), radius};
        const auto sw = check_sandwich(V, a.a1, a.a2, c.seminorm, trials, ctx.seed(block), sampler);
        s << "sandwich: " << (sw.passed() ? "pass" : "violation") << " (" << sw.trials << " histories, "
          << sw.lower_violations << " lower, " << sw.upper_violations << " upper violations)\n";
        failed |= !sw.passed();

        DissipationTolerances tols;
        tols.tol = io::detail::get_or(block, "tol", tols.tol, "check");
        tols.stride = io::detail::get_or<std::size_t>(block, "stride", 1, "check");
        tols.hseq = parse_hseq(block);
        tols.step = c.solver.step;
        tols.bound = c.solver.bound;
        if (tols.stride < 1) {
            throw ConfigError("check.stride must be at least 1");
        }
        const auto rep = check_dissipation(V, a.a3, a.a4, c.system, phi, c.input, c.switching, c.seminorm,
                                           c.solver.horizon, tols);
        ctx.write("dissipation.csv", io::dissipation_csv(rep));
        s << "dissipation: " << (rep.passed() ? "pass" : rep.violations ? "violation" : "inconclusive") << " ("
          << rep.total() << " instants: " << rep.pass << " pass, " << rep.inconclusive << " inconclusive, "
          << rep.violations << " violation)\n";
        s << "worst margin: " << fmt(rep.worst_margin) << "\n";
        for (const auto& smp : rep.samples) {
            if (smp.status == InstantStatus::Violation) {
                s << "first violation: t = " << fmt(smp.t) << ", margin " << fmt(smp.margin) << "\n";
                break;
            }
        }
        if (rep.blew_up) {
            s << "blow-up at t = " << fmt(rep.blowup_time) << "\n";
            blew_up = true;
        }
        failed |= !rep.passed() && (rep.violations > 0 || rep.interior_inconclusive());
    }

    if (envelope) {
        const Trajectory traj = simulate_config(ctx);
        const auto env = config_envelope(ctx, sup_norm(phi), c.solver.horizon);
        const auto chk = envelope_slack(traj, env->beta, env->gamma);
        const double tol = io::detail::get_or(block, "envelope_tol", 1e-6, "check");
        const bool bad = chk.slack < -tol;
        s << "envelope: " << (bad ? "violation" : "pass") << " (min slack " << fmt(chk.slack) << " at t = "
          << fmt(chk.t) << ")\n";
        failed |= bad;
        if (ctx.opt.emit_plot_data) {
            ctx.write("plot.csv", io::plot_csv(traj, env->beta, env->gamma));
        }
    }
    ctx.finish("summary.txt");
    if (failed) {
        return kExitViolation;
    }
    return blew_up ? kExitNumeric : kExitPass;
}

/// Writes the counterexample trajectory and a config that replays it.
inline void write_counterexample(Context& ctx, const Counterexample& cx, const ScenarioSpace& space,
                                 const json& envelope, const KLFunction& beta, const KFunction& gamma)
{
    const auto& c = ctx.cfg;
    const Trajectory traj =
        integrate(c.system, cx.scenario.phi0, cx.scenario.u, cx.scenario.sigma, space.horizon, space.step, space.bound);
    ctx.write("counterexample_trajectory.csv", io::trajectory_csv(traj, c.system));
    if (ctx.opt.emit_plot_data) {
        ctx.write("counterexample_plot.csv", io::plot_csv(traj, beta, gamma));
    }
    json replay = c.raw;
    for (const char* key : {"certify", "falsify", "check", "derive", "probe"}) {
        replay.erase(key);
    }
    replay["history"] = io::history_to_json(cx.scenario.phi0);
    replay["input"] = io::input_to_json(cx.scenario.u);
    replay["switching"] = io::switching_to_json(cx.scenario.sigma, c.system);
    replay["solver"] = {{"step", space.step}, {"horizon", space.horizon}, {"bound", space.bound}};
    replay["envelope"] = envelope;
    ctx.write("counterexample.json", replay.dump(2) + "\n");
}

inline void describe_counterexample(std::ostream& s, const Counterexample& cx)
{
    s << "counterexample: trial " << cx.trial << ", t = " << fmt(cx.t) << ", |x| = " << fmt(cx.x_norm)
      << ", envelope = " << fmt(cx.envelope) << ", half-step re-validation "
      << (cx.revalidated ? "confirmed" : "not confirmed") << "\n";
}

inline int cmd_certify(Context& ctx)
{
    const auto& c = ctx.cfg;
    const auto& a = need_alphas(ctx);
    const auto& V = need_functional(ctx);
    const json block = c.command("certify");
    TrialPlan plan;
    plan.trials = io::detail::get_or<std::size_t>(block, "trials", plan.trials, "certify");
    plan.seed = ctx.seed(block);
    plan.threads = ctx.opt.threads;
    plan.tol = io::detail::get_or(block, "tol", plan.tol, "certify");
    plan.sandwich_trials = io::detail::get_or<std::size_t>(block, "sandwich_trials", plan.sandwich_trials, "certify");
    plan.gamma_scale = io::detail::get_or(block, "gamma_scale", 1.0, "certify");
    plan.space = io::parse_scenario_space(block.contains("scenario") ? block.at("scenario") : json::object(), c);
    if (plan.trials < 1 || !(plan.gamma_scale > 0.0)) {
        throw ConfigError("certify: trials must be >= 1 and gamma_scale > 0");
    }

    const auto rep = certify(c.system, V, a.a1, a.a2, a.a3, a.a4, c.seminorm, plan);
    auto& s = ctx.summary;
    s << "system: " << c.system.name() << "\n";
    s << "gamma: " << rep.gains.gamma.describe() << "\n";
    s << "gamma(1) = " << fmt(rep.gains.gamma(1.0)) << "\n";
    s << "state gain(1) = " << fmt(rep.state_gain(1.0)) << "\n";
    s << "beta(1,t) at t = 0, 1, 4: " << fmt(rep.gains.beta(1.0, 0.0)) << " " << fmt(rep.gains.beta(1.0, 1.0))
      << " " << fmt(rep.gains.beta(1.0, 4.0)) << "\n";
    s << "sandwich: " << (rep.sandwich.passed() ? "pass" : "violation") << " (" << rep.sandwich.trials
      << " histories)\n";
    if (!rep.sandwich.passed()) {
        s << "envelope trials skipped\n";
        ctx.finish("summary.txt");
        return kExitViolation;
    }

    const double r = plan.space.initial_radius;
    std::vector<double> s_grid;
    std::vector<double> t_grid;
    for (int i = 0; i <= 4; ++i) {
        s_grid.push_back(r * i / 4.0);
    }
    for (int i = 0; i <= 20; ++i) {
        t_grid.push_back(plan.space.horizon * i / 20.0);
    }
    ctx.write("kl_table.csv", io::kl_table_csv(rep.gains.beta, s_grid, t_grid));
    ctx.write("trials.csv", io::trials_csv(rep.validation.trials));

    s << "trials: " << plan.trials << ", horizon " << fmt(plan.space.horizon) << "\n";
    s << "violations: " << rep.validation.violations << "\n";
    s << "min slack: " << fmt(rep.validation.min_slack) << "\n";
    if (rep.validation.counterexample) {
        const auto& cx = *rep.validation.counterexample;
        describe_counterexample(s, cx);
        write_counterexample(ctx, cx, plan.space, {{"kind", "derived"}, {"gamma_scale", plan.gamma_scale}},
                             rep.gains.beta, rep.state_gain);
    }
    s << "verdict: " << (rep.passed() ? "pass" : "violation") << "\n";
    ctx.finish("summary.txt");
    return rep.passed() ? kExitPass : kExitViolation;
}

inline int cmd_falsify(Context& ctx)
{
    const auto& c = ctx.cfg;
    const json block = c.command("falsify");
    const ScenarioSpace space =
        io::parse_scenario_space(block.contains("scenario") ? block.at("scenario") : json::object(), c);
    const auto env = config_envelope(ctx, space.initial_radius, space.horizon);
    if (!env) {
        throw ConfigError("falsify needs an 'envelope' or 'k_functions' block");
    }
    const std::size_t budget = io::detail::get_or<std::size_t>(block, "budget", 1000, "falsify");
    if (budget < 1) {
        throw ConfigError("falsify.budget must be at least 1");
    }
    const double tol = io::detail::get_or(block, "tol", 1e-6, "falsify");
    const auto res = falsify(c.system, env->beta, env->gamma, budget, ctx.seed(block), space, tol, ctx.opt.threads);
    ctx.write("trials.csv", io::trials_csv(res.trials));

    auto& s = ctx.summary;
    s << "system: " << c.system.name() << "\n";
    s << "envelope: beta = " << env->beta.describe() << ", gamma = " << env->gamma.describe() << "\n";
    s << "trials run: " << res.trials_run << " of " << budget << "\n";
    if (res.found()) {
        describe_counterexample(s, *res.counterexample);
        const json envelope_block = c.block("envelope") ? *c.block("envelope") : json{{"kind", "derived"}};
        write_counterexample(ctx, *res.counterexample, space, envelope_block, env->beta, env->gamma);
        s << "verdict: counterexample\n";
    } else {
        s << "verdict: exhausted\n";
    }
    ctx.finish("summary.txt");
    return res.found() ? kExitViolation : kExitPass;
}

inline int cmd_probe(Context& ctx)
{
    const auto& c = ctx.cfg;
    const json block = c.command("probe");
    const double radius = io::detail::get_or(block, "radius", 1.0, "probe");
    const std::size_t samples = io::detail::get_or<std::size_t>(block, "samples", 1000, "probe");
    const std::uint64_t seed = ctx.seed(block);
    io::CsvTable table({"mode", "estimate"});
    for (ModeId m = 0; m < c.system.mode_count(); ++m) {
        const double L = lipschitz_probe(c.system, radius, samples, seed, m);
        table.add({c.system.modes()[m], fmt(L)});
        ctx.summary << "L[" << c.system.modes()[m] << "] >= " << fmt(L) << "\n";
    }
    const double all = lipschitz_probe(c.system, radius, samples, seed);
    table.add({"all", fmt(all)});
    ctx.summary << "L >= " << fmt(all) << " on radius " << fmt(radius) << "\n";
    ctx.write("lipschitz.csv", table.str());
    ctx.finish();
    return kExitPass;
}

}  // namespace app

inline const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names{"simulate", "derive", "check", "certify", "falsify",
                                                "probe-lipschitz"};
    return names;
}

/// Runs one command; maps errors to exit statuses and reports them on `err`.
inline int run_command(const std::string& command, const RunOptions& opt, std::ostream& err = std::cerr)
{
    try {
        app::Context ctx{opt, io::load_config(opt.config), {}};
        if (command == "simulate") {
            return app::cmd_simulate(ctx);
        }
        if (command == "derive") {
            return app::cmd_derive(ctx);
        }
        if (command == "check") {
            return app::cmd_check(ctx);
        }
        if (command == "certify") {
            return app::cmd_certify(ctx);
        }
        if (command == "falsify") {
            return app::cmd_falsify(ctx);
        }
        if (command == "probe-lipschitz") {
            return app::cmd_probe(ctx);
        }
        err << "error: unknown command '" << command << "'\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DomainError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const io::json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    }
}

}  // namespace rfdiss
