#pragma once

// CSV output with shortest round-trip number formatting, and atomic writes.

#include "rfdiss/comparison.hpp"
#include "rfdiss/derivatives.hpp"
#include "rfdiss/dynamics.hpp"
#include "rfdiss/errors.hpp"
#include "rfdiss/iss.hpp"
#include "rfdiss/solver.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include <unistd.h>

namespace rfdiss::io {

inline std::string fmt(double x)
{
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline std::string fmt(std::size_t x) { return std::to_string(x); }

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header)
    {
        add(header);
    }

    void add(const std::vector<std::string>& cells)
    {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) {
                text_ += ',';
            }
            text_ += cells[i];
        }
        text_ += '\n';
    }

    const std::string& str() const noexcept { return text_; }

private:
    std::string text_;
};

/// Writes to a sibling temp file, then renames over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content)
{
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ConfigError("cannot write '" + tmp.string() + "'");
        }
        out << content;
        out.flush();
        if (!out) {
            throw ConfigError("write failed for '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw ConfigError("cannot rename onto '" + path.string() + "': " + ec.message());
    }
}

/// t, x1..xn, norm, mode, u1..um at every grid time.
inline std::string trajectory_csv(const Trajectory& traj, const SystemDef& sys)
{
    std::vector<std::string> header{"t"};
    for (Eigen::Index i = 0; i < sys.state_dim(); ++i) {
        header.push_back("x" + std::to_string(i + 1));
    }
    header.push_back("norm");
    header.push_back("mode");
    for (Eigen::Index i = 0; i < sys.input_dim(); ++i) {
        header.push_back("u" + std::to_string(i + 1));
    }
    CsvTable table(header);
    const auto& times = traj.times();
    const auto& states = traj.states();
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double t = times[k];
        std::vector<std::string> row{fmt(t)};
        for (Eigen::Index i = 0; i < states[k].size(); ++i) {
            row.push_back(fmt(states[k][i]));
        }
        row.push_back(fmt(states[k].norm()));
        row.push_back(sys.modes()[traj.switching()(t)]);
        const Vec& u = traj.input()(t);
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            row.push_back(fmt(u[i]));
        }
        table.add(row);
    }
    return table.str();
}

struct DerivativeRow {
    std::string key;  ///< time or mode name
    DerivativeEstimate estimate;
    std::string notion;
};

inline std::string derivative_csv(const std::vector<DerivativeRow>& rows)
{
    CsvTable table({"key", "estimate", "error_bar", "notion"});
    for (const auto& r : rows) {
        table.add({r.key, fmt(r.estimate.value), fmt(r.estimate.error_bar), r.notion});
    }
    return table.str();
}

inline std::string status_name(InstantStatus s)
{
    switch (s) {
    case InstantStatus::Pass: return "pass";
    case InstantStatus::Inconclusive: return "inconclusive";
    case InstantStatus::Violation: return "violation";
    }
    return "?";
}

inline std::string dissipation_csv(const DissipationReport& rep)
{
    CsvTable table({"t", "estimate", "error_bar", "bound", "margin", "status", "left_endpoint"});
    for (const auto& s : rep.samples) {
        table.add({fmt(s.t), fmt(s.estimate), fmt(s.error_bar), fmt(s.bound), fmt(s.margin),
                   status_name(s.status), s.left_endpoint ? "1" : "0"});
    }
    return table.str();
}

inline std::string trials_csv(const std::vector<TrialResult>& trials)
{
    CsvTable table({"trial", "slack", "t", "x0_norm", "u_norm", "blew_up"});
    for (const auto& tr : trials) {
        table.add({fmt(tr.index), fmt(tr.slack), fmt(tr.t), fmt(tr.x0_norm), fmt(tr.u_norm),
                   tr.blew_up ? "1" : "0"});
    }
    return table.str();
}

/// β(s,t) on a grid, one row per (s,t).
inline std::string kl_table_csv(const KLFunction& beta, const std::vector<double>& s_grid,
                                const std::vector<double>& t_grid)
{
    CsvTable table({"s", "t", "beta"});
    for (double s : s_grid) {
        for (double t : t_grid) {
            table.add({fmt(s), fmt(t), fmt(beta(s, t))});
        }
    }
    return table.str();
}

/// t, |x(t)|, β(‖x₀‖_∞,t) + γ(‖u_[0,t)‖_∞).
inline std::string plot_csv(const Trajectory& traj, const KLFunction& beta, const KFunction& gamma)
{
    CsvTable table({"t", "norm", "envelope"});
    const double r = sup_norm(traj.initial());
    const auto& times = traj.times();
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double t = times[k];
        const double un = t > 0.0 ? sup_norm(traj.input(), t) : 0.0;
        table.add({fmt(t), fmt(traj.states()[k].norm()), fmt(beta(r, t) + gamma(un))});
    }
    return table.str();
}

}  // namespace rfdiss::io
