#include "oracles.hpp"
#include "rfdiss/solver.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rfdiss;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

const InputSignal kNoInput = InputSignal::constant(v1(0.0));
const ModeSignal kMode0 = ModeSignal::constant(0);

SystemDef decay() { return catalog::scalar_modes({-1.0}, 1.0, 1.0, {"m"}); }
SystemDef growth() { return catalog::scalar_modes({1.0}, 1.0, 1.0, {"m"}); }

double max_error_vs_oracle(double step, double T)
{
    const oracle::PureDelay exact(static_cast<std::size_t>(T) + 1);
    const auto traj = integrate(catalog::pure_delay(), HistoryFunction::constant(1.0, 0.1, v1(1.0)), kNoInput, kMode0,
                                T, step);
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.times().size(); ++i) {
        worst = std::max(worst, std::abs(traj.states()[i][0] - exact(traj.times()[i])));
    }
    return worst;
}

}  // namespace

TEST(Integrate, ZeroSolution)
{
    const auto traj =
        integrate(catalog::scalar_pair(), HistoryFunction::constant(1.0, 0.1, v1(0.0)), kNoInput,
                  ModeSignal({0, 0.5, 2}, {1, 0, 1}), 5.0, 0.01);
    ASSERT_TRUE(traj.completed());
    for (const auto& x : traj.states()) {
        EXPECT_EQ(x[0], 0.0);
    }
}

TEST(Integrate, ExponentialDecay)
{
    const auto traj = integrate(decay(), HistoryFunction::constant(1.0, 0.1, v1(1.0)), kNoInput, kMode0, 2.0, 1e-3);
    EXPECT_NEAR(traj.eval(1.0)[0], std::exp(-1.0), 1e-6);
}

TEST(Integrate, PureDelayMethodOfSteps)
{
    const auto traj = integrate(catalog::pure_delay(), HistoryFunction::constant(1.0, 0.1, v1(1.0)), kNoInput,
                                kMode0, 3.0, 1e-3);
    EXPECT_NEAR(traj.eval(1.0)[0], 0.0, 1e-6);
    EXPECT_NEAR(traj.eval(2.0)[0], -0.5, 1e-6);
    EXPECT_NEAR(traj.eval(1.5)[0], 1.125 - 3.0 + 1.5, 1e-6);
}

TEST(Integrate, FourthOrderConvergence)
{
    // piecewise polynomials of low degree are integrated exactly, so measure
    // far enough out that the degree exceeds the method order
    const double e1 = max_error_vs_oracle(0.1, 10.0);
    const double e2 = max_error_vs_oracle(0.05, 10.0);
    const double e3 = max_error_vs_oracle(0.025, 10.0);
    EXPECT_GT(e1, 1e-12);
    EXPECT_GE(e1 / e2, 8.0);
    EXPECT_GE(e2 / e3, 8.0);
}

TEST(Integrate, BlowUpDetection)
{
    const auto traj = integrate(growth(), HistoryFunction::constant(1.0, 0.1, v1(1.0)), kNoInput, kMode0, 20.0,
                                1e-3, 1e3);
    EXPECT_EQ(traj.status(), TrajectoryStatus::BlowUp);
    EXPECT_NEAR(traj.end_time(), std::log(1e3), 0.05);
    EXPECT_GT(traj.states().back().norm(), 1e3);
}

TEST(Integrate, GridContainsBreakpointsAndDelayMultiples)
{
    const InputSignal u({0, 0.123, 1.7777}, {v1(1), v1(-1), v1(0.5)});
    const ModeSignal s({0, 0.5001}, {0, 0});
    const auto traj = integrate(catalog::pure_delay(1.0, 1.0), HistoryFunction::constant(1.0, 0.1, v1(1.0)), u, s,
                                3.0, 0.01);
    const auto& t = traj.times();
    for (double b : {0.123, 0.5001, 1.0, 1.7777, 2.0, 3.0}) {
        EXPECT_TRUE(std::find(t.begin(), t.end(), b) != t.end()) << b;
    }
    for (std::size_t i = 1; i < t.size(); ++i) {
        EXPECT_GT(t[i], t[i - 1]);
    }
}

TEST(Integrate, DecayIsMonotoneOnGrid)
{
    const auto traj = integrate(decay(), HistoryFunction::constant(1.0, 0.1, v1(1.0)), kNoInput, kMode0, 10.0, 0.01);
    for (std::size_t i = 1; i < traj.states().size(); ++i) {
        EXPECT_LE(std::abs(traj.states()[i][0]), std::abs(traj.states()[i - 1][0]));
    }
}

TEST(Integrate, ValidatesArguments)
{
    const auto phi = HistoryFunction::constant(1.0, 0.1, v1(1.0));
    EXPECT_THROW(integrate(decay(), phi, kNoInput, kMode0, 1.0, 0.03), DomainError);
    EXPECT_THROW(integrate(decay(), phi, kNoInput, kMode0, -1.0, 0.01), DomainError);
    EXPECT_THROW(integrate(decay(), phi, kNoInput, ModeSignal::constant(3), 1.0, 0.01), ConfigError);
    EXPECT_THROW(integrate(decay(), phi, InputSignal::constant(Vec::Zero(2)), kMode0, 1.0, 0.01), ConfigError);
    EXPECT_THROW(integrate(catalog::pure_delay(2.0), phi, kNoInput, kMode0, 1.0, 0.01), ConfigError);
    EXPECT_THROW(integrate(decay(), phi, kNoInput, kMode0, 1.0, 0.01, 0.5), DomainError);
}

TEST(StateAt, Examples)
{
    const auto phi = HistoryFunction::sinusoid(1.0, 0.1, v1(0.2), v1(0.5), 2.0, 0.3);
    const auto traj = integrate(decay(), phi, kNoInput, kMode0, 2.0, 1e-3);
    const auto w0 = state_at(traj, 0.0);
    for (double th : {-1.0, -0.55, 0.0}) {
        EXPECT_NEAR(w0.eval(th)[0], phi.eval(th)[0], 1e-12);
    }
    const auto one = integrate(decay(), HistoryFunction::constant(1.0, 0.1, v1(1.0)), kNoInput, kMode0, 2.0, 1e-3);
    EXPECT_NEAR(state_at(one, 1.0).eval(-0.5)[0], std::exp(-0.5), 1e-6);
    EXPECT_THROW(state_at(one, 2.5), DomainError);

    const auto zero = integrate(decay(), HistoryFunction::constant(1.0, 0.1, v1(0.0)), kNoInput, kMode0, 2.0, 1e-2);
    EXPECT_EQ(sup_norm(state_at(zero, 1.37)), 0.0);
}

TEST(ContinuousDependence, Examples)
{
    const auto phi = HistoryFunction::constant(1.0, 0.1, v1(1.0));
    const auto psi = HistoryFunction::constant(1.0, 0.1, v1(1.01));
    EXPECT_EQ(*continuous_dependence_check(decay(), phi, phi, kNoInput, kMode0, 1.0, 1e-3), 0.0);
    EXPECT_LE(*continuous_dependence_check(decay(), phi, psi, kNoInput, kMode0, 1.0, 1e-3), 0.01 + 1e-15);
    EXPECT_NEAR(*continuous_dependence_check(growth(), phi, psi, kNoInput, kMode0, 1.0, 1e-3), 0.01 * std::exp(1.0),
                1e-4);
    EXPECT_FALSE(continuous_dependence_check(growth(), phi, psi, kNoInput, kMode0, 10.0, 1e-2, 100.0).has_value());
}
