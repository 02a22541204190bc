#pragma once

// JSON experiment configs. Every parse error surfaces as ConfigError with the
// offending key path.

#include "rfdiss/comparison.hpp"
#include "rfdiss/derivatives.hpp"
#include "rfdiss/dynamics.hpp"
#include "rfdiss/errors.hpp"
#include "rfdiss/history.hpp"
#include "rfdiss/iss.hpp"
#include "rfdiss/signals.hpp"
#include "rfdiss/solver.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace rfdiss::io {

using nlohmann::json;

namespace detail {

[[noreturn]] inline void fail(const std::string& where, const std::string& what)
{
    throw ConfigError(where + ": " + what);
}

inline const json& require(const json& j, const std::string& key, const std::string& where)
{
    if (!j.is_object() || !j.contains(key)) {
        fail(where, "missing key '" + key + "'");
    }
    return j.at(key);
}

inline double number(const json& j, const std::string& where)
{
    if (!j.is_number()) {
        fail(where, "expected a number");
    }
    return j.get<double>();
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& where)
{
    if (!j.is_object() || !j.contains(key)) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        fail(where + "." + key, "wrong type");
    }
}

inline Vec vector(const json& j, const std::string& where)
{
    if (j.is_number()) {
        return Vec::Constant(1, j.get<double>());
    }
    if (!j.is_array()) {
        fail(where, "expected an array of numbers");
    }
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = number(j[i], where + "[" + std::to_string(i) + "]");
    }
    return v;
}

inline Mat matrix(const json& j, const std::string& where)
{
    if (j.is_number()) {
        return Mat::Constant(1, 1, j.get<double>());
    }
    if (!j.is_array() || j.empty()) {
        fail(where, "expected a non-empty array of rows");
    }
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) {
            fail(where, "rows must be arrays of equal length");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                number(j[r][c], where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
        }
    }
    return m;
}

inline std::vector<double> numbers(const json& j, const std::string& where)
{
    if (!j.is_array()) {
        fail(where, "expected an array of numbers");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
    }
    return out;
}

inline std::vector<std::string> strings(const json& j, const std::string& where)
{
    if (!j.is_array()) {
        fail(where, "expected an array of strings");
    }
    std::vector<std::string> out;
    for (const auto& e : j) {
        if (!e.is_string()) {
            fail(where, "expected an array of strings");
        }
        out.push_back(e.get<std::string>());
    }
    return out;
}

inline json to_json(const Vec& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(v[i]);
    }
    return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Systems

/// Builds a catalog system from {"name": ..., "params": {...}}.
inline SystemDef parse_system(const json& j)
{
    using namespace detail;
    const std::string where = "system";
    const std::string name = get_or<std::string>(j, "name", "", where);
    const json params = j.contains("params") ? j.at("params") : json::object();
    const std::string pw = where + ".params";
    if (name == "pure_delay") {
        return catalog::pure_delay(get_or(params, "lag", 1.0, pw), get_or(params, "input_gain", 0.0, pw));
    }
    if (name == "scalar_pair") {
        return catalog::scalar_pair(get_or(params, "delay", 1.0, pw));
    }
    if (name == "scalar_modes") {
        auto rates = numbers(require(params, "rates", pw), pw + ".rates");
        std::vector<std::string> names;
        if (params.contains("modes")) {
            names = strings(params.at("modes"), pw + ".modes");
        } else {
            for (std::size_t i = 0; i < rates.size(); ++i) {
                names.push_back("m" + std::to_string(i));
            }
        }
        return catalog::scalar_modes(std::move(rates), get_or(params, "input_gain", 1.0, pw),
                                     get_or(params, "delay", 1.0, pw), std::move(names));
    }
    if (name == "linear_delay") {
        const Mat A0 = matrix(require(params, "A0", pw), pw + ".A0");
        const Mat A1 = params.contains("A1") ? matrix(params.at("A1"), pw + ".A1")
                                             : Mat::Zero(A0.rows(), A0.cols());
        const Mat B = params.contains("B") ? matrix(params.at("B"), pw + ".B") : Mat::Zero(A0.rows(), 0);
        auto delays = numbers(require(params, "mode_delays", pw), pw + ".mode_delays");
        std::vector<std::string> names;
        if (params.contains("modes")) {
            names = strings(params.at("modes"), pw + ".modes");
        }
        return catalog::linear_delay(A0, A1, B, std::move(delays), get_or(params, "delay", 1.0, pw),
                                     std::move(names));
    }
    fail(where + ".name", "unknown catalog system '" + name + "'");
}

// ---------------------------------------------------------------------------
// Histories and signals

inline HistoryFunction parse_history(const json& j, const SystemDef& sys)
{
    using namespace detail;
    const std::string where = "history";
    const double delay = sys.delay();
    const double hg = get_or(j, "grid_step", delay / 10.0, where);
    const std::string kind = get_or<std::string>(j, "kind", "constant", where);
    const Eigen::Index n = sys.state_dim();
    auto sized = [&](const Vec& v, const std::string& key) {
        if (v.size() != n) {
            fail(where + "." + key, "expected " + std::to_string(n) + " components");
        }
        return v;
    };
    try {
        if (kind == "constant") {
            const Vec c = j.contains("value") ? sized(vector(j.at("value"), where + ".value"), "value")
                                              : Vec(Vec::Zero(n));
            return HistoryFunction::constant(delay, hg, c);
        }
        if (kind == "linear") {
            return HistoryFunction::linear(delay, hg, sized(vector(require(j, "a", where), where + ".a"), "a"),
                                           sized(vector(require(j, "b", where), where + ".b"), "b"));
        }
        if (kind == "sinusoid") {
            return HistoryFunction::sinusoid(
                delay, hg, sized(vector(require(j, "offset", where), where + ".offset"), "offset"),
                sized(vector(require(j, "amplitude", where), where + ".amplitude"), "amplitude"),
                number(require(j, "omega", where), where + ".omega"), get_or(j, "phase", 0.0, where));
        }
        if (kind == "nodes") {
            std::vector<Vec> values;
            for (const auto& v : require(j, "values", where)) {
                values.push_back(sized(vector(v, where + ".values"), "values"));
            }
            auto read = [&](const std::string& key) {
                std::vector<Vec> out;
                for (const auto& v : require(j, key, where)) {
                    out.push_back(sized(vector(v, where + "." + key), key));
                }
                return out;
            };
            if (j.contains("slopes")) {
                return HistoryFunction(delay, hg, std::move(values), read("slopes"));
            }
            return HistoryFunction(delay, hg, std::move(values), read("left_slopes"), read("right_slopes"));
        }
    } catch (const DomainError& e) {
        fail(where, e.what());
    }
    fail(where + ".kind", "unknown history kind '" + kind + "'");
}

/// Nodes form; reproduces φ exactly on reload.
inline json history_to_json(const HistoryFunction& phi)
{
    json values = json::array();
    json left = json::array();
    json right = json::array();
    for (std::size_t j = 0; j < phi.node_count(); ++j) {
        values.push_back(detail::to_json(phi.values()[j]));
        left.push_back(detail::to_json(phi.left_slopes()[j]));
        right.push_back(detail::to_json(phi.right_slopes()[j]));
    }
    return {{"kind", "nodes"}, {"grid_step", phi.grid_step()}, {"values", values},
            {"left_slopes", left}, {"right_slopes", right}};
}

/// [[t, [u...]], ...]; missing means u ≡ 0.
inline InputSignal parse_input(const json* j, const SystemDef& sys)
{
    using namespace detail;
    if (!j) {
        return InputSignal::constant(Vec::Zero(sys.input_dim()));
    }
    if (!j->is_array() || j->empty()) {
        fail("input", "expected a non-empty list of [time, value] pairs");
    }
    std::vector<double> ts;
    std::vector<Vec> vs;
    for (std::size_t i = 0; i < j->size(); ++i) {
        const std::string where = "input[" + std::to_string(i) + "]";
        const json& e = (*j)[i];
        if (!e.is_array() || e.size() != 2) {
            fail(where, "expected [time, value]");
        }
        ts.push_back(number(e[0], where + "[0]"));
        Vec v = vector(e[1], where + "[1]");
        if (v.size() != sys.input_dim()) {
            fail(where, "expected " + std::to_string(sys.input_dim()) + " input components");
        }
        vs.push_back(std::move(v));
    }
    try {
        return InputSignal(std::move(ts), std::move(vs));
    } catch (const DomainError& e) {
        fail("input", e.what());
    }
}

/// [[t, "mode"], ...]; missing means the first mode throughout.
inline ModeSignal parse_switching(const json* j, const SystemDef& sys)
{
    using namespace detail;
    if (!j) {
        return ModeSignal::constant(0);
    }
    if (!j->is_array() || j->empty()) {
        fail("switching", "expected a non-empty list of [time, mode] pairs");
    }
    std::vector<double> ts;
    std::vector<ModeId> ms;
    for (std::size_t i = 0; i < j->size(); ++i) {
        const std::string where = "switching[" + std::to_string(i) + "]";
        const json& e = (*j)[i];
        if (!e.is_array() || e.size() != 2 || !e[1].is_string()) {
            fail(where, "expected [time, mode name]");
        }
        ts.push_back(number(e[0], where + "[0]"));
        ms.push_back(sys.mode_id(e[1].get<std::string>()));
    }
    try {
        return ModeSignal(std::move(ts), std::move(ms));
    } catch (const DomainError& e) {
        fail("switching", e.what());
    }
}

inline json input_to_json(const InputSignal& u)
{
    json out = json::array();
    for (std::size_t i = 0; i < u.pieces(); ++i) {
        out.push_back(json::array({u.breakpoints()[i], detail::to_json(u.values()[i])}));
    }
    return out;
}

inline json switching_to_json(const ModeSignal& sigma, const SystemDef& sys)
{
    json out = json::array();
    for (std::size_t i = 0; i < sigma.pieces(); ++i) {
        out.push_back(json::array({sigma.breakpoints()[i], sys.modes()[sigma.values()[i]]}));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Functionals and comparison functions

inline CandidateFunctional parse_functional(const json& j, const SystemDef& sys)
{
    using namespace detail;
    const std::string where = "functional";
    const std::string kind = get_or<std::string>(j, "kind", "point_quadratic", where);
    const Eigen::Index n = sys.state_dim();
    const Mat P = j.contains("P") ? matrix(j.at("P"), where + ".P") : Mat(Mat::Identity(n, n));
    if (P.rows() != n) {
        fail(where + ".P", "size must match the state dimension");
    }
    if (kind == "point_quadratic") {
        return CandidateFunctional::point_quadratic(P);
    }
    if (kind == "integral_quadratic") {
        const Mat Q = matrix(require(j, "Q", where), where + ".Q");
        return CandidateFunctional::integral_quadratic(P, Q);
    }
    fail(where + ".kind", "unknown functional kind '" + kind + "'");
}

inline KFunction parse_kfunction(const json& j, const std::string& where)
{
    using namespace detail;
    const std::string kind = get_or<std::string>(j, "kind", "", where);
    try {
        if (kind == "power") {
            return KFunction::power(get_or(j, "c", 1.0, where), number(require(j, "p", where), where + ".p"));
        }
        if (kind == "linear") {
            return KFunction::linear(get_or(j, "c", 1.0, where));
        }
        if (kind == "identity") {
            return KFunction::identity();
        }
        if (kind == "tabulated") {
            return KFunction::tabulated(numbers(require(j, "x", where), where + ".x"),
                                        numbers(require(j, "y", where), where + ".y"));
        }
    } catch (const DomainError& e) {
        fail(where, e.what());
    }
    fail(where + ".kind", "unknown K-function kind '" + kind + "'");
}

inline json kfunction_to_json(const KFunction& f)
{
    if (f.is_power()) {
        return {{"kind", "power"}, {"c", f.coefficient()}, {"p", f.exponent()}};
    }
    auto [x, y] = f.knots();
    return {{"kind", "tabulated"}, {"x", x}, {"y", y}};
}

struct Alphas {
    KFunction a1;
    KFunction a2;
    KFunction a3;
    KFunction a4;
};

inline std::optional<Alphas> parse_alphas(const json& root)
{
    if (!root.contains("k_functions")) {
        return std::nullopt;
    }
    const json& k = root.at("k_functions");
    auto one = [&](const char* key) {
        return parse_kfunction(detail::require(k, key, "k_functions"), std::string("k_functions.") + key);
    };
    return Alphas{one("alpha1"), one("alpha2"), one("alpha3"), one("alpha4")};
}

inline SeminormSpec parse_seminorm(const json* j)
{
    if (!j) {
        return SeminormSpec::point();
    }
    try {
        return SeminormSpec::parse(detail::get_or<std::string>(*j, "kind", "point", "seminorm"),
                                   detail::get_or(*j, "scale", 1.0, "seminorm"));
    } catch (const DomainError& e) {
        detail::fail("seminorm", e.what());
    }
}

inline json seminorm_to_json(const SeminormSpec& s)
{
    return {{"kind", s.name()}, {"scale", s.scale}};
}

// ---------------------------------------------------------------------------
// Full experiment

struct SolverConfig {
    double step = 1e-3;
    double horizon = 10.0;
    double bound = kDefaultBlowUpBound;
};

/// Envelope β(r,t) + γ(s): explicit, or derived from α₁..α₄.
struct EnvelopeSpec {
    json raw;
};

struct ExperimentConfig {
    json raw;
    SystemDef system;
    std::optional<HistoryFunction> history;
    InputSignal input;
    ModeSignal switching;
    std::optional<CandidateFunctional> functional;
    std::optional<Alphas> alphas;
    SeminormSpec seminorm;
    SolverConfig solver;

    const json* block(const std::string& key) const { return raw.contains(key) ? &raw.at(key) : nullptr; }

    /// Command block or an empty object.
    json command(const std::string& key) const { return raw.contains(key) ? raw.at(key) : json::object(); }
};

inline SolverConfig parse_solver(const json* j)
{
    SolverConfig s;
    if (!j) {
        return s;
    }
    s.step = detail::get_or(*j, "step", s.step, "solver");
    s.horizon = detail::get_or(*j, "horizon", s.horizon, "solver");
    s.bound = detail::get_or(*j, "bound", s.bound, "solver");
    if (!(s.step > 0.0) || !(s.horizon > 0.0) || !(s.bound > 0.0)) {
        detail::fail("solver", "step, horizon and bound must be positive");
    }
    return s;
}

inline void check_step_divides(double step, double grid_step, const std::string& where)
{
    const double ratio = grid_step / step;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio) || std::round(ratio) < 1) {
        detail::fail(where, "solver step must divide the history grid step");
    }
}

inline ExperimentConfig parse_config(const json& root)
{
    if (!root.is_object()) {
        detail::fail("config", "top level must be an object");
    }
    try {
        SystemDef sys = parse_system(detail::require(root, "system", "config"));
        auto get = [&](const char* key) { return root.contains(key) ? &root.at(key) : nullptr; };
        std::optional<HistoryFunction> history;
        if (const json* h = get("history")) {
            history = parse_history(*h, sys);
        }
        InputSignal input = parse_input(get("input"), sys);
        ModeSignal switching = parse_switching(get("switching"), sys);
        std::optional<CandidateFunctional> functional;
        if (const json* f = get("functional")) {
            functional = parse_functional(*f, sys);
        }
        auto alphas = parse_alphas(root);
        const SeminormSpec seminorm = parse_seminorm(get("seminorm"));
        const SolverConfig solver = parse_solver(get("solver"));
        if (history) {
            check_step_divides(solver.step, history->grid_step(), "solver.step");
        }
        return {root, std::move(sys), std::move(history), std::move(input), std::move(switching),
                std::move(functional), std::move(alphas), seminorm, solver};
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config '" + path.string() + "'");
    }
    json root;
    try {
        root = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    return parse_config(root);
}

/// Scenario space for certify/falsify: block keys override solver defaults.
inline ScenarioSpace parse_scenario_space(const json& j, const ExperimentConfig& cfg)
{
    using namespace detail;
    const std::string where = "scenario";
    ScenarioSpace s;
    s.horizon = get_or(j, "horizon", cfg.solver.horizon, where);
    s.step = get_or(j, "step", std::max(cfg.solver.step, 1e-2), where);
    s.history_grid_step = get_or(j, "history_grid_step", cfg.system.delay() / 10.0, where);
    s.max_breakpoints = get_or<std::size_t>(j, "max_breakpoints", s.max_breakpoints, where);
    s.min_dwell = get_or(j, "min_dwell", 0.0, where);
    if (j.contains("input_box")) {
        const auto box = numbers(j.at("input_box"), where + ".input_box");
        if (box.size() != 2 || !(box[0] <= box[1])) {
            fail(where + ".input_box", "expected [lo, hi] with lo <= hi");
        }
        s.input_lo = box[0];
        s.input_hi = box[1];
    }
    if (j.contains("modes")) {
        for (const auto& name : strings(j.at("modes"), where + ".modes")) {
            s.modes.push_back(cfg.system.mode_id(name));
        }
    }
    s.initial_radius = get_or(j, "initial_radius", s.initial_radius, where);
    s.bound = get_or(j, "bound", cfg.solver.bound, where);
    if (!(s.horizon > 0.0) || !(s.step > 0.0) || !(s.initial_radius >= 0.0) || !(s.bound > s.initial_radius)) {
        fail(where, "horizon and step must be positive and bound must exceed initial_radius");
    }
    check_step_divides(s.step, s.history_grid_step, where + ".step");
    try {
        (void)HistoryFunction::piece_count(cfg.system.delay(), s.history_grid_step);
    } catch (const DomainError& e) {
        fail(where + ".history_grid_step", e.what());
    }
    return s;
}

inline json scenario_space_to_json(const ScenarioSpace& s, const SystemDef& sys)
{
    json modes = json::array();
    for (ModeId m : s.modes) {
        modes.push_back(sys.modes()[m]);
    }
    return {{"horizon", s.horizon},
            {"step", s.step},
            {"history_grid_step", s.history_grid_step},
            {"max_breakpoints", s.max_breakpoints},
            {"min_dwell", s.dwell()},
            {"input_box", {s.input_lo, s.input_hi}},
            {"modes", modes},
            {"initial_radius", s.initial_radius},
            {"bound", s.bound}};
}

struct Envelope {
    KLFunction beta;
    KFunction gamma;
    std::string description;
};

/// "envelope": {"beta": {"kind": "exponential", "c", "rate"}, "gamma": {K}} or
/// {"kind": "derived", "gamma_scale": c}, which builds β and the state gain
/// α₁⁻¹∘γ from the k_functions block. `r_max` bounds the initial sup-norms.
inline Envelope parse_envelope(const json& j, const ExperimentConfig& cfg, double r_max, double horizon)
{
    using namespace detail;
    const std::string where = "envelope";
    const std::string kind = get_or<std::string>(j, "kind", "explicit", where);
    if (kind == "derived") {
        if (!cfg.alphas) {
            fail(where, "derived envelope needs a k_functions block");
        }
        IssGainOptions opt;
        opt.r_max = std::max(r_max, 1e-12) * (1.0 + 1e-9);
        opt.horizon = horizon;
        const auto& a = *cfg.alphas;
        IssGains g = iss_gains(a.a1, a.a2, a.a3, a.a4, cfg.seminorm.upper(), opt);
        const double c = get_or(j, "gamma_scale", 1.0, where);
        KFunction gamma = scale(c, compose(inverse(a.a1), g.gamma));
        return {std::move(g.beta), std::move(gamma), "derived"};
    }
    if (kind != "explicit") {
        fail(where + ".kind", "expected 'explicit' or 'derived'");
    }
    const json& b = require(j, "beta", where);
    const std::string bk = get_or<std::string>(b, "kind", "", where + ".beta");
    if (bk != "exponential") {
        fail(where + ".beta.kind", "only 'exponential' KL envelopes are supported");
    }
    KLFunction beta = KLFunction::exponential(get_or(b, "c", 1.0, where + ".beta"),
                                              number(require(b, "rate", where + ".beta"), where + ".beta.rate"));
    KFunction gamma = parse_kfunction(require(j, "gamma", where), where + ".gamma");
    return {std::move(beta), std::move(gamma), "explicit"};
}

}  // namespace rfdiss::io
