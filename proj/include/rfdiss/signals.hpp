#pragma once

// Right-continuous piecewise-constant signals: inputs u(t) ∈ Rᵐ and
// switching signals σ(t) ∈ S.

#include "rfdiss/errors.hpp"
#include "rfdiss/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace rfdiss {

/// Breakpoints closer than this are merged (the later value wins).
inline constexpr double kBreakpointMergeTol = 1e-12;

template <class V>
class PcSignal {
public:
    using value_type = V;

    PcSignal(std::vector<double> breakpoints, std::vector<V> values)
    {
        if (breakpoints.empty() || breakpoints.size() != values.size()) {
            throw DomainError("PcSignal: need one value per breakpoint and at least one piece");
        }
        if (std::abs(breakpoints.front()) > kBreakpointMergeTol) {
            throw DomainError("PcSignal: first breakpoint must be 0");
        }
        breakpoints.front() = 0.0;
        breakpoints_.reserve(breakpoints.size());
        values_.reserve(values.size());
        for (std::size_t i = 0; i < breakpoints.size(); ++i) {
            const double t = breakpoints[i];
            if (!std::isfinite(t)) {
                throw DomainError("PcSignal: non-finite breakpoint");
            }
            if (!breakpoints_.empty()) {
                const double gap = t - breakpoints_.back();
                if (gap < -kBreakpointMergeTol) {
                    throw DomainError("PcSignal: breakpoints must be increasing");
                }
                if (gap < kBreakpointMergeTol) {
                    // zero-length piece: the later value takes over
                    values_.back() = std::move(values[i]);
                    continue;
                }
            }
            breakpoints_.push_back(t);
            values_.push_back(std::move(values[i]));
        }
    }

    static PcSignal constant(V value) { return PcSignal({0.0}, {std::move(value)}); }

    const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
    const std::vector<V>& values() const noexcept { return values_; }
    std::size_t pieces() const noexcept { return breakpoints_.size(); }

    /// Index i of the piece with t ∈ [t_i, t_{i+1}).
    std::size_t piece_index(double t) const
    {
        if (!(t >= 0.0)) {
            throw DomainError("PcSignal: evaluation at negative time");
        }
        const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
        return static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
    }

    const V& operator()(double t) const { return values_[piece_index(t)]; }

    /// First breakpoint strictly after t, or +inf.
    double next_breakpoint(double t) const
    {
        const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
        return it == breakpoints_.end() ? INFINITY : *it;
    }

private:
    std::vector<double> breakpoints_;
    std::vector<V> values_;
};

using InputSignal = PcSignal<Vec>;
using ModeSignal = PcSignal<ModeId>;

template <class V>
const V& eval(const PcSignal<V>& sig, double t)
{
    return sig(t);
}

/// τ ↦ sig(t + τ).
template <class V>
PcSignal<V> shift(const PcSignal<V>& sig, double t)
{
    if (!(t >= 0.0)) {
        throw DomainError("shift: negative shift");
    }
    const std::size_t first = sig.piece_index(t);
    std::vector<double> bps{0.0};
    std::vector<V> vals{sig.values()[first]};
    for (std::size_t i = first + 1; i < sig.pieces(); ++i) {
        bps.push_back(sig.breakpoints()[i] - t);
        vals.push_back(sig.values()[i]);
    }
    return PcSignal<V>(std::move(bps), std::move(vals));
}

/// sig on [t1,t2) and `outside` elsewhere. For inputs `outside` is zero; for
/// switching signals it is a caller-designated default mode.
template <class V>
PcSignal<V> restrict(const PcSignal<V>& sig, double t1, double t2, const V& outside)
{
    if (!(t1 >= 0.0) || !(t1 < t2)) {
        throw DomainError("restrict: need 0 <= t1 < t2");
    }
    std::vector<double> bps;
    std::vector<V> vals;
    if (t1 > 0.0) {
        bps.push_back(0.0);
        vals.push_back(outside);
    }
    bps.push_back(t1);
    vals.push_back(sig(t1));
    for (std::size_t i = 0; i < sig.pieces(); ++i) {
        const double b = sig.breakpoints()[i];
        if (b > t1 && b < t2) {
            bps.push_back(b);
            vals.push_back(sig.values()[i]);
        }
    }
    if (std::isfinite(t2)) {
        bps.push_back(t2);
        vals.push_back(outside);
    }
    return PcSignal<V>(std::move(bps), std::move(vals));
}

inline InputSignal restrict(const InputSignal& u, double t1, double t2)
{
    return restrict(u, t1, t2, Vec::Zero(u.values().front().size()).eval());
}

/// Essential sup of |u| over [0,horizon): max magnitude over the pieces that
/// intersect the window.
template <class V>
double sup_norm(const PcSignal<V>& sig, double horizon)
{
    if (!(horizon > 0.0)) {
        throw DomainError("sup_norm: horizon must be positive");
    }
    double best = 0.0;
    for (std::size_t i = 0; i < sig.pieces() && sig.breakpoints()[i] < horizon; ++i) {
        best = std::max(best, magnitude(sig.values()[i]));
    }
    return best;
}

/// Uniformly sampled signal read as a zero-order hold.
struct SampledSignal {
    double step;
    std::vector<Vec> samples;

    std::size_t index(double t) const
    {
        if (!(t >= 0.0)) {
            throw DomainError("SampledSignal: evaluation at negative time");
        }
        auto i = static_cast<std::size_t>(std::floor(t / step));
        if (static_cast<double>(i + 1) * step <= t) {
            ++i;
        }
        while (i > 0 && static_cast<double>(i) * step > t) {
            --i;
        }
        return std::min(i, samples.size() - 1);
    }

    const Vec& operator()(double t) const { return samples[index(t)]; }

    InputSignal to_pc() const
    {
        std::vector<double> bps(samples.size());
        for (std::size_t i = 0; i < bps.size(); ++i) {
            bps[i] = static_cast<double>(i) * step;
        }
        return InputSignal(std::move(bps), samples);
    }
};

/// Zero-order-hold sampling of f at t = iδ, i = 0..⌈horizon/δ⌉.
inline SampledSignal sample(const std::function<Vec(double)>& f, double delta, double horizon)
{
    if (!(delta > 0.0) || !(horizon > 0.0)) {
        throw DomainError("sample: need positive period and horizon");
    }
    const auto count = static_cast<std::size_t>(std::ceil(horizon / delta - 1e-9)) + 1;
    SampledSignal out{delta, {}};
    out.samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.samples.push_back(f(static_cast<double>(i) * delta));
    }
    return out;
}

inline InputSignal sample_to_pc(const std::function<Vec(double)>& f, double delta, double horizon)
{
    return sample(f, delta, horizon).to_pc();
}

}  // namespace rfdiss
