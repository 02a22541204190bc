// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fail.

#include "oracles.hpp"
#include "rfdiss/app.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

using namespace rfdiss;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok;
    std::string detail;
};

Vec v1(double x) { return Vec::Constant(1, x); }

std::string num(double x)
{
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

const auto kSq = KFunction::power(1, 2);
const auto kV = CandidateFunctional::point_quadratic(Mat::Identity(1, 1));

SystemDef forced_decay() { return catalog::scalar_modes({-1.0}, 1.0, 1.0, {"m"}); }

double pure_delay_error(double step, double T)
{
    const oracle::PureDelay exact(static_cast<std::size_t>(T) + 1);
    const auto traj = integrate(catalog::pure_delay(), HistoryFunction::constant(1.0, 0.1, v1(1.0)),
                                InputSignal::constant(v1(0.0)), ModeSignal::constant(0), T, step);
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.times().size(); ++i) {
        worst = std::max(worst, std::abs(traj.states()[i][0] - exact(traj.times()[i])));
    }
    return worst;
}

Outcome solver_oracle()
{
    const auto traj = integrate(catalog::pure_delay(), HistoryFunction::constant(1.0, 0.1, v1(1.0)),
                                InputSignal::constant(v1(0.0)), ModeSignal::constant(0), 2.0, 1e-3);
    const double e1 = std::abs(traj.eval(1.0)[0]);
    const double e2 = std::abs(traj.eval(2.0)[0] + 0.5);
    // low-degree pieces are integrated exactly; the order shows on [0,10]
    const double a = pure_delay_error(0.1, 10.0);
    const double b = pure_delay_error(0.05, 10.0);
    const double c = pure_delay_error(0.025, 10.0);
    const bool ok = e1 <= 1e-6 && e2 <= 1e-6 && a / b >= 8.0 && b / c >= 8.0;
    return {ok, "|x(1)|=" + num(e1) + " |x(2)+0.5|=" + num(e2) + " error ratios " + num(a / b) + ", " +
                    num(b / c)};
}

Outcome zero_equilibrium()
{
    Mat A0(2, 2);
    A0 << -1.0, 2.0, 0.5, -3.0;
    Mat A1(2, 2);
    A1 << 0.4, 0.0, -0.2, 0.1;
    Mat B(2, 1);
    B << 1.0, -1.0;
    const std::vector<SystemDef> systems{catalog::linear_delay(A0, A1, B, {0.0, 0.3, 1.0}, 1.0),
                                         catalog::scalar_pair(), catalog::pure_delay(),
                                         catalog::scalar_modes({-1.0, 2.0, 0.0}, 1.0, 1.0, {"a", "b", "c"})};
    double worst = 0.0;
    std::size_t runs = 0;
    for (const auto& sys : systems) {
        for (std::uint64_t k = 0; k < 5; ++k) {
            auto rng = trial_rng(2, k);
            ScenarioSpace space;
            space.max_breakpoints = 8;
            const auto sc = random_scenario(rng, sys, space);
            const auto traj = integrate(sys, HistoryFunction::constant(sys.delay(), 0.1, Vec::Zero(sys.state_dim())),
                                        InputSignal::constant(Vec::Zero(sys.input_dim())), sc.sigma, 10.0, 1e-2);
            for (const auto& x : traj.states()) {
                worst = std::max(worst, x.norm());
            }
            ++runs;
        }
    }
    return {worst <= 1e-12, std::to_string(runs) + " runs, max |x| = " + num(worst)};
}

Outcome driver_dini_agreement()
{
    const auto sys = forced_decay();
    const auto hseq = HSequence::geometric();
    const double near = hseq.steps[hseq.steps.size() - 2];
    ScenarioSpace space;
    space.step = 1e-3;
    double worst = 0.0;
    std::size_t instants = 0;
    for (std::uint64_t k = 0; k < 50; ++k) {
        auto rng = trial_rng(3, k);
        const auto sc = random_scenario(rng, sys, space);
        const auto traj = integrate(sys, sc.phi0, sc.u, sc.sigma, space.horizon + hseq.largest(), space.step);
        for (int i = 1; i < 100; ++i) {
            const double t = 0.1 * i + 0.0005;
            const double next = std::min(sc.u.next_breakpoint(t), sc.sigma.next_breakpoint(t));
            if (t + near >= next) {
                continue;
            }
            const double d2 = dini_along_solution(kV, traj, t, hseq).value;
            const double d1 = driver_derivative_mode(kV, sys, state_at(traj, t), sc.u(t), sc.sigma(t), hseq).value;
            worst = std::max(worst, std::abs(d2 - d1));
            ++instants;
        }
    }
    return {worst <= 1e-3, std::to_string(instants) + " instants, max |D2 - D1| = " + num(worst)};
}

Outcome definitional_identities()
{
    const auto sys = catalog::scalar_modes({-1.0, -2.0}, 0.0, 1.0, {"slow", "fast"});
    const auto hseq = HSequence::geometric();
    std::mt19937_64 rng(4);
    const HistorySampler cfg{1, 1.0, 0.1, 2.0};
    bool same = true;
    bool max_exact = true;
    for (int k = 0; k < 20; ++k) {
        const auto phi = random_history(rng, cfg);
        const Vec v = detail::random_in_ball(rng, 1, 1.0);
        double mx = -INFINITY;
        for (ModeId s = 0; s < sys.mode_count(); ++s) {
            const auto d3 = s_dini(kV, sys, phi, InputSignal::constant(v), ModeSignal::constant(s), hseq);
            const auto d4 = mode_dini(kV, sys, phi, v, s, hseq);
            same &= d3.value == d4.value && d3.quotients == d4.quotients;
            mx = std::max(mx, d4.value);
        }
        max_exact &= sup_mode_dini(kV, sys, phi, v, hseq).value == mx;
    }
    const double ex = sup_mode_dini(kV, sys, HistoryFunction::constant(1.0, 0.1, v1(1.0)), v1(0.0), hseq).value;
    const bool ok = same && max_exact && std::abs(ex + 2.0) <= 1e-3;
    return {ok, std::string("D3==D4 ") + (same ? "yes" : "no") + ", D5==max D4 " + (max_exact ? "yes" : "no") +
                    ", example " + num(ex)};
}

Outcome comparison_lemma()
{
    const double lin = kl_from_alpha(KFunction::identity(), 10.0, 10.0)(1.0, 1.0);
    const double sq = kl_from_alpha(kSq, 10.0, 10.0)(1.0, 1.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t sound = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto alpha = KFunction::power(0.2 + 2 * unit(rng), 0.5 + 2.5 * unit(rng));
        const double y0 = 3 * unit(rng);
        const double amp = unit(rng);
        const double freq = 5 * unit(rng);
        const auto beta = kl_from_alpha(alpha, 3.0, 5.0);
        auto rhs = [&](double t, double y) { return -alpha(std::max(y, 0.0)) * (2 + amp * std::sin(freq * t)); };
        double y = y0;
        bool ok = true;
        const double h = 1e-3;
        for (int i = 0; i < 5000 && ok; ++i) {
            const double t = i * h;
            const double k1 = rhs(t, y);
            const double k2 = rhs(t + h / 2, y + h / 2 * k1);
            const double k3 = rhs(t + h / 2, y + h / 2 * k2);
            const double k4 = rhs(t + h, y + h * k3);
            y = std::max(0.0, y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4));
            ok = y <= beta(y0, t + h) + 1e-6;
        }
        sound += ok;
    }
    const bool ok = std::abs(lin - std::exp(-1.0)) <= 1e-6 && std::abs(sq - 0.5) <= 1e-6 && sound == 100;
    return {ok, "beta(1,1)=" + num(lin) + " / " + num(sq) + ", sound trials " + std::to_string(sound) + "/100"};
}

Outcome gain_composition()
{
    const auto g = iss_gains(kSq, kSq, kSq, kSq, 1.0);
    const double g1 = g.gamma(1.0);
    double worst = 0.0;
    for (double t : {0.0, 1.0, 4.0}) {
        worst = std::max(worst, std::abs(g.beta(1.0, t) - std::exp(-t / 4)));
    }
    return {std::abs(g1 - 2.0) <= 1e-9 && worst <= 1e-4,
            "gamma(1)=" + num(g1) + ", max |beta(1,t)-e^{-t/4}| = " + num(worst)};
}

Outcome end_to_end_certification()
{
    const auto sys = forced_decay();
    DissipationTolerances tols;
    tols.stride = 10;
    ScenarioSpace space;
    std::size_t passed = 0;
    std::size_t instants = 0;
    for (std::uint64_t k = 0; k < 100; ++k) {
        auto rng = trial_rng(7, k);
        const auto sc = random_scenario(rng, sys, space);
        const auto rep =
            check_dissipation(kV, kSq, kSq, sys, sc.phi0, sc.u, sc.sigma, SeminormSpec::point(), space.horizon, tols);
        passed += rep.passed() && rep.pass == rep.total();
        instants += rep.total();
    }
    TrialPlan plan;
    plan.trials = 1000;
    plan.seed = 7;
    const auto cert = certify(sys, kV, kSq, kSq, kSq, kSq, SeminormSpec::point(), plan);
    const bool ok = passed == 100 && cert.passed() && cert.validation.violations == 0;
    return {ok, "dissipation " + std::to_string(passed) + "/100 scenarios (" + std::to_string(instants) +
                    " instants), certify violations " + std::to_string(cert.validation.violations) + "/1000"};
}

Outcome falsification_power()
{
    ScenarioSpace space;
    const auto res =
        falsify(catalog::scalar_pair(), KLFunction::exponential(1.0, 1.0), KFunction::identity(), 1000, 8, space);
    if (!res.found()) {
        return {false, "exhausted after " + std::to_string(res.trials_run) + " trials"};
    }
    const auto& cx = *res.counterexample;
    return {cx.revalidated && res.trials_run <= 1000,
            "trial " + std::to_string(cx.trial) + ", t=" + num(cx.t) + ", |x|=" + num(cx.x_norm) +
                " > envelope " + num(cx.envelope) + (cx.revalidated ? ", re-validated" : ", not re-validated")};
}

Outcome seminorm_and_sandwich()
{
    std::mt19937_64 rng(9);
    const HistorySampler cfg{2, 1.0, 0.05, 3.0};
    const std::vector<SeminormSpec> specs{SeminormSpec::point(), SeminormSpec::sup(), SeminormSpec::scaled_point(0.4)};
    std::size_t bad = 0;
    for (int k = 0; k < 1000; ++k) {
        const auto phi = random_history(rng, cfg);
        const double p0 = phi.at_zero().norm();
        const double sup = sup_norm(phi);
        for (const auto& s : specs) {
            const double a = seminorm(phi, s);
            bad += !(s.lower() * p0 <= a * (1 + 1e-12) + 1e-15 && a <= s.upper() * sup * (1 + 1e-12) + 1e-15);
        }
    }
    Mat P(2, 2);
    P << 2.0, 0.4, 0.4, 1.0;
    Mat Q(2, 2);
    Q << 0.5, 0.1, 0.1, 0.3;
    const Eigen::SelfAdjointEigenSolver<Mat> ep(P);
    const double lo = ep.eigenvalues().minCoeff();
    const double hi = ep.eigenvalues().maxCoeff();
    const double qn = Eigen::SelfAdjointEigenSolver<Mat>(Q).eigenvalues().maxCoeff();
    const auto point = check_sandwich(CandidateFunctional::point_quadratic(P), KFunction::power(lo, 2),
                                      KFunction::power(hi, 2), SeminormSpec::point(), 1000, 9, cfg);
    const auto integral = check_sandwich(CandidateFunctional::integral_quadratic(P, Q), KFunction::power(lo, 2),
                                         KFunction::power(hi + cfg.delay * qn, 2), SeminormSpec::sup(), 1000, 10, cfg);
    const bool ok = bad == 0 && point.passed() && integral.passed();
    return {ok, "semi-norm failures " + std::to_string(bad) + "/3000, sandwich point " +
                    (point.passed() ? "pass" : "fail") + ", integral " + (integral.passed() ? "pass" : "fail")};
}

Outcome replay_determinism()
{
    const fs::path configs = RFDISS_CONFIG_DIR;
    const fs::path work = fs::temp_directory_path() / "rfdiss_acceptance_replay";
    fs::remove_all(work);
    std::size_t compared = 0;
    std::string mismatch;
    const std::vector<std::pair<std::string, std::string>> runs{{"certify", "certify_stable.json"},
                                                                {"falsify", "falsify_switching.json"},
                                                                {"simulate", "linear_delay_probe.json"},
                                                                {"derive", "derive_two_rates.json"}};
    for (const auto& [cmd, file] : runs) {
        for (const char* tag : {"a", "b"}) {
            RunOptions opt;
            opt.config = configs / file;
            opt.out_dir = work / (cmd + tag);
            opt.quiet = true;
            opt.threads = tag[0] == 'a' ? 1 : 3;
            opt.emit_plot_data = cmd == "falsify";
            std::ostringstream err;
            run_command(cmd, opt, err);
        }
        for (const auto& e : fs::directory_iterator(work / (cmd + "a"))) {
            if (e.path().extension() != ".csv") {
                continue;
            }
            auto read = [](const fs::path& p) {
                std::ifstream in(p, std::ios::binary);
                std::ostringstream os;
                os << in.rdbuf();
                return os.str();
            };
            const auto other = work / (cmd + "b") / e.path().filename();
            if (!fs::exists(other) || read(e.path()) != read(other)) {
                mismatch += " " + cmd + "/" + e.path().filename().string();
            }
            ++compared;
        }
    }
    fs::remove_all(work);
    return {compared > 0 && mismatch.empty(),
            std::to_string(compared) + " CSV files compared" + (mismatch.empty() ? "" : ", differ:" + mismatch)};
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"solver oracle and convergence order", solver_oracle},
        {"zero equilibrium invariance", zero_equilibrium},
        {"Driver/Dini cross-agreement", driver_dini_agreement},
        {"definitional identities D3/D4/D5", definitional_identities},
        {"comparison lemma envelope", comparison_lemma},
        {"gain composition", gain_composition},
        {"end-to-end certification", end_to_end_certification},
        {"falsification power", falsification_power},
        {"semi-norm and sandwich bounds", seminorm_and_sandwich},
        {"replay determinism", replay_determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out{false, ""};
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += !out.ok;
        std::cout << (out.ok ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << out.detail
                  << " (" << num(secs) << " s)" << std::endl;
    }
    std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failures == 0 ? 0 : 1;
}
