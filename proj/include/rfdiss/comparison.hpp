#pragma once

// Comparison functions: class K / K∞ functions with composition and inverse,
// KL envelopes, the flow envelope β_α of ẏ = -α(y), and the ISS gains
//   γ = α₂ ∘ α₃⁻¹ ∘ (2α₄),   β(r,t) = α₁⁻¹(β_α(α₂(γ̄_a r), t)),
//   α = ½ α₃ ∘ α₂⁻¹.

#include "rfdiss/errors.hpp"
#include "rfdiss/hermite.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rfdiss {

namespace detail {

/// Fritsch–Carlson slopes for strictly increasing data (monotone PCHIP).
inline std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y)
{
    const std::size_t n = x.size();
    std::vector<double> d(n, 0.0);
    if (n == 2) {
        d[0] = d[1] = (y[1] - y[0]) / (x[1] - x[0]);
        return d;
    }
    std::vector<double> h(n - 1);
    std::vector<double> del(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        h[k] = x[k + 1] - x[k];
        del[k] = (y[k + 1] - y[k]) / h[k];
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (del[k - 1] * del[k] <= 0.0) {
            d[k] = 0.0;
        } else {
            const double w1 = 2 * h[k] + h[k - 1];
            const double w2 = h[k] + 2 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
        }
    }
    auto edge = [](double h0, double h1, double m0, double m1) {
        double d0 = ((2 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if (d0 * m0 <= 0.0) {
            d0 = 0.0;
        } else if (m0 * m1 <= 0.0 && std::abs(d0) > std::abs(3 * m0)) {
            d0 = 3 * m0;
        }
        return d0;
    };
    d[0] = edge(h[0], h[1], del[0], del[1]);
    d[n - 1] = edge(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    return d;
}

/// Root of a monotone scalar function on [lo,hi] by bisection.
template <class F>
double bisect(F&& f, double lo, double hi, double target)
{
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        if (f(mid) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Continuous, strictly increasing, zero at zero. Power/linear kinds are
/// unbounded (K∞); tabulated kinds are defined on a finite range and use
/// monotone piecewise-cubic interpolation.
class KFunction {
public:
    static KFunction power(double c, double p)
    {
        if (!(c > 0.0) || !(p > 0.0) || !std::isfinite(c) || !std::isfinite(p)) {
            throw DomainError("KFunction::power: need c > 0 and p > 0");
        }
        return KFunction(Power{c, p});
    }
    static KFunction linear(double c) { return power(c, 1.0); }
    static KFunction identity() { return power(1.0, 1.0); }

    /// Samples of a class-K function: xs[0] = ys[0] = 0, both strictly increasing.
    static KFunction tabulated(std::vector<double> xs, std::vector<double> ys)
    {
        if (xs.size() < 2 || xs.size() != ys.size()) {
            throw DomainError("KFunction::tabulated: need at least two samples");
        }
        if (xs.front() != 0.0 || ys.front() != 0.0) {
            throw DomainError("KFunction::tabulated: first sample must be (0,0)");
        }
        for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
            if (!(xs[k + 1] > xs[k]) || !(ys[k + 1] > ys[k])) {
                throw DomainError("KFunction::tabulated: samples must be strictly increasing");
            }
        }
        auto slopes = detail::pchip_slopes(xs, ys);
        return KFunction(Table{std::move(xs), std::move(ys), std::move(slopes), false});
    }

    double operator()(double s) const
    {
        if (!(s >= 0.0)) {
            throw DomainError("KFunction: negative argument");
        }
        if (const auto* p = std::get_if<Power>(&rep_)) {
            return s == 0.0 ? 0.0 : p->c * std::pow(s, p->p);
        }
        const auto& t = std::get<Table>(rep_);
        return t.inverted ? table_inverse(t, s) : table_forward(t, s);
    }

    bool is_power() const noexcept { return std::holds_alternative<Power>(rep_); }
    /// K∞: unbounded. Only the closed-form kinds qualify.
    bool is_unbounded() const noexcept { return is_power(); }
    double coefficient() const { return std::get<Power>(rep_).c; }
    double exponent() const { return std::get<Power>(rep_).p; }

    /// Largest argument accepted (+inf for power kinds).
    double domain_max() const
    {
        if (is_power()) {
            return std::numeric_limits<double>::infinity();
        }
        const auto& t = std::get<Table>(rep_);
        return t.inverted ? t.ys.back() : t.xs.back();
    }

    /// Sample points (x, f(x)) that define a tabulated function exactly.
    std::pair<std::vector<double>, std::vector<double>> knots() const
    {
        const auto& t = std::get<Table>(rep_);
        return t.inverted ? std::pair{t.ys, t.xs} : std::pair{t.xs, t.ys};
    }

    std::string describe() const
    {
        std::ostringstream os;
        os.precision(17);
        if (const auto* p = std::get_if<Power>(&rep_)) {
            os << "power(c=" << p->c << ", p=" << p->p << ")";
        } else {
            const auto& t = std::get<Table>(rep_);
            os << (t.inverted ? "inverse-" : "") << "tabulated(" << t.xs.size()
               << " samples, domain [0," << domain_max() << "])";
        }
        return os.str();
    }

    friend KFunction inverse(const KFunction& f);
    friend KFunction compose(const KFunction& g, const KFunction& f);

private:
    struct Power {
        double c;
        double p;
    };
    struct Table {
        std::vector<double> xs;
        std::vector<double> ys;
        std::vector<double> slopes;
        bool inverted;
    };

    explicit KFunction(Power p) : rep_(p) {}
    explicit KFunction(Table t) : rep_(std::move(t)) {}

    static std::size_t locate(const std::vector<double>& grid, double s)
    {
        const auto it = std::upper_bound(grid.begin(), grid.end(), s);
        const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - grid.begin() - 1, 0));
        return std::min(k, grid.size() - 2);
    }

    static double range_check(const std::vector<double>& grid, double s)
    {
        const double top = grid.back();
        if (s > top) {
            if (s <= top * (1.0 + 1e-12)) {
                return top;
            }
            std::ostringstream os;
            os << "KFunction: argument " << s << " beyond tabulated range " << top;
            throw RangeError(os.str());
        }
        return s;
    }

    static double piece_value(const Table& t, std::size_t k, double s)
    {
        const double len = t.xs[k + 1] - t.xs[k];
        const auto cubic = detail::hermite_cubic(len, t.ys[k], t.ys[k + 1], t.slopes[k], t.slopes[k + 1]);
        return cubic((s - t.xs[k]) / len);
    }

    static double table_forward(const Table& t, double s)
    {
        s = range_check(t.xs, s);
        const std::size_t k = locate(t.xs, s);
        return piece_value(t, k, s);
    }

    static double table_inverse(const Table& t, double y)
    {
        y = range_check(t.ys, y);
        const std::size_t k = locate(t.ys, y);
        if (y == t.ys[k]) {
            return t.xs[k];
        }
        if (y == t.ys[k + 1]) {
            return t.xs[k + 1];
        }
        return detail::bisect([&](double s) { return piece_value(t, k, s); }, t.xs[k], t.xs[k + 1], y);
    }

    std::variant<Power, Table> rep_;
};

inline KFunction inverse(const KFunction& f)
{
    if (const auto* p = std::get_if<KFunction::Power>(&f.rep_)) {
        return KFunction::power(std::pow(p->c, -1.0 / p->p), 1.0 / p->p);
    }
    auto t = std::get<KFunction::Table>(f.rep_);
    t.inverted = !t.inverted;
    return KFunction(std::move(t));
}

/// (g ∘ f)(s) = g(f(s)). Power ∘ power stays closed form; anything involving
/// a table is re-tabulated on the table's knots.
inline KFunction compose(const KFunction& g, const KFunction& f)
{
    const auto* pg = std::get_if<KFunction::Power>(&g.rep_);
    const auto* pf = std::get_if<KFunction::Power>(&f.rep_);
    if (pg && pf) {
        return KFunction::power(pg->c * std::pow(pf->c, pg->p), pg->p * pf->p);
    }
    std::vector<double> xs{0.0};
    std::vector<double> ys{0.0};
    if (!pf) {
        const auto [kx, ky] = f.knots();
        const double top = g.domain_max();
        for (std::size_t k = 1; k < kx.size() && ky[k] <= top; ++k) {
            xs.push_back(kx[k]);
            ys.push_back(g(ky[k]));
        }
    } else {
        const auto [kx, ky] = g.knots();
        const KFunction finv = inverse(f);
        for (std::size_t k = 1; k < kx.size(); ++k) {
            xs.push_back(finv(kx[k]));
            ys.push_back(ky[k]);
        }
    }
    if (xs.size() < 2) {
        throw RangeError("compose: range of the inner function misses the outer domain");
    }
    return KFunction::tabulated(std::move(xs), std::move(ys));
}

inline KFunction scale(double c, const KFunction& f) { return compose(KFunction::linear(c), f); }

/// Two-argument envelope β(s,t): class K in s, nonincreasing to zero in t.
class KLFunction {
public:
    using Fn = std::function<double(double, double)>;

    KLFunction(Fn fn, std::string description,
               double s_max = std::numeric_limits<double>::infinity())
        : fn_(std::move(fn)), description_(std::move(description)), s_max_(s_max)
    {
    }

    /// β(s,t) = c·s·e^{-rate·t}.
    static KLFunction exponential(double c, double rate)
    {
        if (!(c > 0.0) || !(rate > 0.0)) {
            throw DomainError("KLFunction::exponential: need c > 0 and rate > 0");
        }
        std::ostringstream os;
        os.precision(17);
        os << "exponential(c=" << c << ", rate=" << rate << ")";
        return KLFunction([c, rate](double s, double t) { return c * s * std::exp(-rate * t); },
                          os.str());
    }

    double operator()(double s, double t) const
    {
        if (!(s >= 0.0) || !(t >= 0.0)) {
            throw DomainError("KLFunction: arguments must be nonnegative");
        }
        return fn_(s, t);
    }

    const std::string& describe() const noexcept { return description_; }
    double s_max() const noexcept { return s_max_; }

private:
    Fn fn_;
    std::string description_;
    double s_max_;
};

/// Outcome of sampling the KL properties on a grid.
struct KlGridCheck {
    bool class_k_in_s = true;
    bool nonincreasing_in_t = true;
    bool decays = true;
};

/// β(·,t) increasing, β(s,·) nonincreasing, and β(s,t_last) <= decay·β(s,0).
/// Flows that reach zero in finite time are allowed to sit at 0 for small s.
inline KlGridCheck check_kl_on_grid(const KLFunction& beta, const std::vector<double>& s_grid,
                                    const std::vector<double>& t_grid, double decay = 0.5)
{
    KlGridCheck out;
    for (double t : t_grid) {
        double prev = beta(0.0, t);
        if (prev != 0.0) {
            out.class_k_in_s = false;
        }
        for (double s : s_grid) {
            const double v = beta(s, t);
            if (s > 0.0 && !(v > prev) && !(v == 0.0 && prev == 0.0)) {
                out.class_k_in_s = false;
            }
            prev = v;
        }
    }
    for (double s : s_grid) {
        double prev = beta(s, t_grid.front());
        for (double t : t_grid) {
            const double v = beta(s, t);
            if (v > prev) {
                out.nonincreasing_in_t = false;
            }
            prev = v;
        }
        if (s > 0.0 && beta(s, t_grid.back()) > decay * beta(s, 0.0)) {
            out.decays = false;
        }
    }
    return out;
}

namespace detail {

/// Flow of ẏ = -α(y) through the time-to-reach function
///   G(y) = ∫_y^{Y} dz / α(z),   β_α(y0,t) = G⁻¹(G(y0) + t),
/// tabulated in w = ln y with exact slopes dG/dw = -y/α(y).
class FlowTable {
public:
    FlowTable(const KFunction& alpha, double y_max)
        : alpha_(alpha), y_max_(y_max), w_top_(std::log(y_max))
    {
        if (!(y_max > 0.0) || !std::isfinite(y_max)) {
            throw DomainError("kl_from_alpha: y0_max must be positive and finite");
        }
        const auto count = static_cast<std::size_t>(std::ceil(kDecades * std::log(10.0) / kDw)) + 1;
        w_.resize(count);
        g_.resize(count);
        dg_.resize(count);
        static constexpr std::array<double, 5> gx{-0.9061798459386640, -0.5384693101056831, 0.0,
                                                  0.5384693101056831, 0.9061798459386640};
        static constexpr std::array<double, 5> gw{0.2369268850561891, 0.4786286704993665,
                                                  0.5688888888888889, 0.4786286704993665,
                                                  0.2369268850561891};
        for (std::size_t k = 0; k < count; ++k) {
            w_[k] = w_top_ - static_cast<double>(k) * kDw;
            dg_[k] = -integrand(w_[k]);
            if (k == 0) {
                g_[k] = 0.0;
                continue;
            }
            const double mid = 0.5 * (w_[k - 1] + w_[k]);
            double acc = 0.0;
            for (std::size_t q = 0; q < gx.size(); ++q) {
                acc += gw[q] * integrand(mid + 0.5 * kDw * gx[q]);
            }
            g_[k] = g_[k - 1] + 0.5 * kDw * acc;
        }
    }

    double operator()(double y0, double t) const
    {
        if (!(t >= 0.0) || !(y0 >= 0.0)) {
            throw DomainError("beta_alpha: arguments must be nonnegative");
        }
        if (y0 > y_max_ * (1.0 + 1e-12)) {
            std::ostringstream os;
            os << "beta_alpha: y0 = " << y0 << " exceeds the table bound " << y_max_;
            throw RangeError(os.str());
        }
        if (y0 == 0.0 || t == 0.0) {
            return y0;
        }
        const double target = reach_time(std::log(std::min(y0, y_max_))) + t;
        const std::size_t last = w_.size() - 1;
        if (target >= g_[last]) {
            return std::exp(w_[last] + (target - g_[last]) / dg_[last]);
        }
        const auto it = std::upper_bound(g_.begin(), g_.end(), target);
        const auto k = static_cast<std::size_t>(it - g_.begin()) - 1;
        const double w = detail::bisect([&](double s) { return piece(k, s); }, 0.0, 1.0, target);
        return std::exp(w_[k] - w * kDw);
    }

    double y_max() const noexcept { return y_max_; }

private:
    static constexpr double kDw = 0.01;
    static constexpr double kDecades = 16.0;

    double integrand(double w) const
    {
        const double y = std::exp(w);
        const double a = alpha_(y);
        if (!(a > 0.0) || !std::isfinite(a)) {
            std::ostringstream os;
            os << "kl_from_alpha: alpha is not positive at y = " << y;
            throw DomainError(os.str());
        }
        return y / a;
    }

    /// Hermite piece k in the unit variable s (w = w_k - s·dw).
    double piece(std::size_t k, double s) const
    {
        const auto c = detail::hermite_cubic(kDw, g_[k], g_[k + 1], -dg_[k], -dg_[k + 1]);
        return c(s);
    }

    double reach_time(double w) const
    {
        const std::size_t last = w_.size() - 1;
        if (w <= w_[last]) {
            return g_[last] + dg_[last] * (w - w_[last]);
        }
        const double pos = (w_top_ - w) / kDw;
        const auto k = std::min(static_cast<std::size_t>(std::max(pos, 0.0)), last - 1);
        return piece(k, pos - static_cast<double>(k));
    }

    KFunction alpha_;
    double y_max_;
    double w_top_;
    std::vector<double> w_;
    std::vector<double> g_;
    std::vector<double> dg_;
};

}  // namespace detail

/// β_α(y0,t): the flow of ẏ = -α(y) from y0, for y0 ∈ [0, y0_max]. The
/// comparison lemma gives y(t) <= β_α(y0,t) whenever D⁺y <= -α(y).
/// `horizon` is the time range the envelope is exported and checked on.
inline KLFunction kl_from_alpha(const KFunction& alpha, double y0_max, double horizon)
{
    if (!(horizon > 0.0)) {
        throw DomainError("kl_from_alpha: horizon must be positive");
    }
    if (alpha(0.0) != 0.0) {
        throw DomainError("kl_from_alpha: alpha(0) must be 0");
    }
    auto table = std::make_shared<const detail::FlowTable>(alpha, y0_max);
    std::ostringstream os;
    os.precision(17);
    os << "flow-envelope(alpha=" << alpha.describe() << ", y0_max=" << y0_max
       << ", horizon=" << horizon << ")";
    return KLFunction([table](double y0, double t) { return (*table)(y0, t); }, os.str(), y0_max);
}

struct IssGainOptions {
    /// Largest initial sup-norm the envelope β must cover.
    double r_max = 100.0;
    double horizon = 100.0;
};

struct IssGains {
    KLFunction beta;
    KFunction gamma;
    /// ½ α₃ ∘ α₂⁻¹, the decay rate fed to the comparison lemma.
    KFunction alpha;
    KLFunction beta_alpha;
};

inline IssGains iss_gains(const KFunction& a1, const KFunction& a2, const KFunction& a3,
                          const KFunction& a4, double gamma_a_upper, IssGainOptions opt = {})
{
    if (!(gamma_a_upper > 0.0)) {
        throw DomainError("iss_gains: semi-norm upper constant must be positive");
    }
    KFunction gamma = compose(a2, compose(inverse(a3), scale(2.0, a4)));
    KFunction alpha = scale(0.5, compose(a3, inverse(a2)));
    const double y0_max = a2(gamma_a_upper * opt.r_max);
    KLFunction beta_alpha = kl_from_alpha(alpha, y0_max, opt.horizon);
    const KFunction a1_inv = inverse(a1);
    std::ostringstream os;
    os << "alpha1^-1(beta_alpha(alpha2(" << gamma_a_upper << " r), t))";
    KLFunction beta(
        [a1_inv, a2, gamma_a_upper, beta_alpha](double r, double t) {
            return a1_inv(beta_alpha(a2(gamma_a_upper * r), t));
        },
        os.str(), opt.r_max);
    return {std::move(beta), std::move(gamma), std::move(alpha), std::move(beta_alpha)};
}

}  // namespace rfdiss
