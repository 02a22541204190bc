#pragma once

// The switched family {f_s}: ẋ(t) = f_{σ(t)}(x_t, u(t)).

#include "rfdiss/errors.hpp"
#include "rfdiss/history.hpp"
#include "rfdiss/types.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace rfdiss {

/// (mode, window, input) ↦ f_s(φ,u). Must be re-entrant.
using FieldFn = std::function<Vec(ModeId, const History&, const Vec&)>;

class SystemDef {
public:
    /// Registers the family and checks f_s(0,0) = 0 for every mode.
    SystemDef(std::string name, Eigen::Index state_dim, Eigen::Index input_dim, double delay,
              std::vector<std::string> modes, FieldFn field)
        : name_(std::move(name)), n_(state_dim), m_(input_dim), delay_(delay),
          modes_(std::move(modes)), field_(std::move(field))
    {
        if (n_ < 1 || m_ < 0) {
            throw ConfigError("system '" + name_ + "': invalid dimensions");
        }
        if (!(delay_ > 0.0)) {
            throw ConfigError("system '" + name_ + "': delay must be positive");
        }
        if (modes_.empty()) {
            throw ConfigError("system '" + name_ + "': mode list is empty");
        }
        for (std::size_t i = 0; i < modes_.size(); ++i) {
            for (std::size_t j = i + 1; j < modes_.size(); ++j) {
                if (modes_[i] == modes_[j]) {
                    throw ConfigError("system '" + name_ + "': duplicate mode '" + modes_[i] + "'");
                }
            }
        }
        const auto zero = HistoryFunction::constant(delay_, delay_, Vec::Zero(n_));
        const Vec u0 = Vec::Zero(m_);
        for (ModeId s = 0; s < modes_.size(); ++s) {
            const Vec f = field_(s, zero, u0);
            if (f.size() != n_ || !f.allFinite() || f.norm() > 1e-12) {
                throw ConfigError("system '" + name_ + "': f_s(0,0) != 0 for mode '" +
                                  modes_[s] + "'");
            }
        }
    }

    const std::string& name() const noexcept { return name_; }
    Eigen::Index state_dim() const noexcept { return n_; }
    Eigen::Index input_dim() const noexcept { return m_; }
    double delay() const noexcept { return delay_; }
    const std::vector<std::string>& modes() const noexcept { return modes_; }
    std::size_t mode_count() const noexcept { return modes_.size(); }
    const FieldFn& field() const noexcept { return field_; }

    std::optional<ModeId> find_mode(const std::string& mode) const
    {
        const auto it = std::find(modes_.begin(), modes_.end(), mode);
        if (it == modes_.end()) {
            return std::nullopt;
        }
        return static_cast<ModeId>(it - modes_.begin());
    }

    ModeId mode_id(const std::string& mode) const
    {
        if (auto id = find_mode(mode)) {
            return *id;
        }
        throw ConfigError("system '" + name_ + "': unknown mode '" + mode + "'");
    }

private:
    std::string name_;
    Eigen::Index n_;
    Eigen::Index m_;
    double delay_;
    std::vector<std::string> modes_;
    FieldFn field_;
};

inline Vec eval_field(const SystemDef& sys, ModeId s, const History& phi, const Vec& u)
{
    if (s >= sys.mode_count()) {
        throw ConfigError("eval_field: unknown mode index " + std::to_string(s));
    }
    if (phi.dim() != sys.state_dim() || u.size() != sys.input_dim()) {
        throw ConfigError("eval_field: dimension mismatch");
    }
    if (!u.allFinite()) {
        throw NumericError("eval_field: non-finite input");
    }
    Vec f = sys.field()(s, phi, u);
    if (f.size() != sys.state_dim()) {
        throw ConfigError("eval_field: field returned wrong dimension");
    }
    if (!f.allFinite()) {
        throw NumericError("eval_field: non-finite field value");
    }
    return f;
}

/// Empirical Lipschitz constant over C_H × B(0,H):
///   max |f_s(φ,u) - f_s(ψ,v)| / (‖φ-ψ‖_∞ + |u-v|).
/// A lower bound for any valid L_H. With `mode` set only that mode is probed;
/// the sample stream does not depend on the mode, so a per-mode estimate
/// never exceeds the joint one for the same seed.
inline double lipschitz_probe(const SystemDef& sys, double H, std::size_t samples,
                              std::uint64_t seed, std::optional<ModeId> mode = std::nullopt)
{
    if (!(H > 0.0) || samples < 2) {
        throw DomainError("lipschitz_probe: need H > 0 and at least 2 samples");
    }
    if (mode && *mode >= sys.mode_count()) {
        throw ConfigError("lipschitz_probe: unknown mode");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> kind(0, 2);
    std::bernoulli_distribution same_input(0.5);
    const HistorySampler half{sys.state_dim(), sys.delay(), sys.delay() / 32.0, 0.5 * H};
    const Eigen::Index m = sys.input_dim();

    double best = 0.0;
    bool any = false;
    for (std::size_t k = 0; k < samples; ++k) {
        const HistoryFunction phi = random_history(rng, half);
        HistoryFunction delta = kind(rng) == 0
                                    ? HistoryFunction::constant(
                                          half.delay, half.grid_step,
                                          detail::random_in_ball(rng, half.dim, half.radius))
                                    : random_history(rng, half);
        std::vector<Vec> vals = phi.values();
        std::vector<Vec> left = phi.left_slopes();
        std::vector<Vec> right = phi.right_slopes();
        for (std::size_t j = 0; j < vals.size(); ++j) {
            vals[j] += delta.values()[j];
            left[j] += delta.left_slopes()[j];
            right[j] += delta.right_slopes()[j];
        }
        const HistoryFunction psi(half.delay, half.grid_step, std::move(vals), std::move(left),
                                  std::move(right));
        const Vec u = detail::random_in_ball(rng, m, 0.5 * H);
        const Vec v = (m == 0 || same_input(rng)) ? u : Vec(u + detail::random_in_ball(rng, m, 0.5 * H));
        const double denom = sup_norm(delta) + (u - v).norm();
        if (!(denom > 1e-14)) {
            continue;
        }
        any = true;
        for (ModeId s = 0; s < sys.mode_count(); ++s) {
            if (mode && s != *mode) {
                continue;
            }
            const double num = (eval_field(sys, s, phi, u) - eval_field(sys, s, psi, v)).norm();
            best = std::max(best, num / denom);
        }
    }
    if (!any) {
        throw SamplingError("lipschitz_probe: every sampled pair was degenerate");
    }
    return best;
}

namespace catalog {

/// ẋ(t) = A0 x(t) + A1 x(t - τ_s) + B u(t), one delay τ_s ∈ [0,Δ] per mode.
inline SystemDef linear_delay(const Mat& A0, const Mat& A1, const Mat& B,
                              std::vector<double> mode_delays, double delay,
                              std::vector<std::string> mode_names = {})
{
    const Eigen::Index n = A0.rows();
    if (A0.cols() != n || A1.rows() != n || A1.cols() != n || B.rows() != n) {
        throw ConfigError("linear_delay: matrix shapes inconsistent with state dimension");
    }
    if (mode_delays.empty()) {
        throw ConfigError("linear_delay: need at least one mode delay");
    }
    for (double tau : mode_delays) {
        if (!(tau >= 0.0) || tau > delay) {
            throw ConfigError("linear_delay: mode delays must lie in [0, delay]");
        }
    }
    if (mode_names.empty()) {
        for (std::size_t i = 0; i < mode_delays.size(); ++i) {
            mode_names.push_back("m" + std::to_string(i));
        }
    }
    if (mode_names.size() != mode_delays.size()) {
        throw ConfigError("linear_delay: one name per mode delay required");
    }
    return SystemDef("linear_delay", n, B.cols(), delay, std::move(mode_names),
                     [A0, A1, B, taus = std::move(mode_delays)](ModeId s, const History& phi,
                                                                const Vec& u) -> Vec {
                         Vec out = A0 * phi.eval(0.0) + A1 * phi.eval(-taus[s]);
                         if (B.cols() > 0) {
                             out += B * u;
                         }
                         return out;
                     });
}

/// Scalar ẋ = a_s x(t) + b u(t).
inline SystemDef scalar_modes(std::vector<double> rates, double input_gain, double delay,
                              std::vector<std::string> mode_names)
{
    if (rates.empty() || rates.size() != mode_names.size()) {
        throw ConfigError("scalar_modes: one name per rate required");
    }
    return SystemDef("scalar_modes", 1, 1, delay, std::move(mode_names),
                     [rates = std::move(rates), input_gain](ModeId s, const History& phi,
                                                            const Vec& u) -> Vec {
                         return rates[s] * phi.eval(0.0) + input_gain * u;
                     });
}

/// Stable/unstable pair ẋ = -x + u, ẋ = +x + u.
inline SystemDef scalar_pair(double delay = 1.0)
{
    return scalar_modes({-1.0, 1.0}, 1.0, delay, {"stable", "unstable"});
}

/// ẋ(t) = -x(t - lag) + b u(t), with Δ = lag.
inline SystemDef pure_delay(double lag = 1.0, double input_gain = 0.0)
{
    if (!(lag > 0.0)) {
        throw ConfigError("pure_delay: lag must be positive");
    }
    return SystemDef("pure_delay", 1, 1, lag, {"delay"},
                     [lag, input_gain](ModeId, const History& phi, const Vec& u) -> Vec {
                         return -phi.eval(-lag) + input_gain * u;
                     });
}

}  // namespace catalog

}  // namespace rfdiss
