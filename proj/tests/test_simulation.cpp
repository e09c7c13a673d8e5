#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "lurye/attractors.hpp"
#include "lurye/simulation.hpp"
#include "lurye/stability.hpp"

using namespace lurye;

namespace {

const std::vector<double> kExcitation{1.0, 0.6, -0.6, -1.0, 0.0};

StateSpaceRealization printed_realization(double g) {
    StateSpaceRealization ss;
    ss.domain = Domain::discrete;
    ss.A.resize(2, 2);
    ss.A << 0.5, 0.0, 1.0, 0.0;
    ss.B.resize(2);
    ss.B << 2.0 * g, 0.0;
    ss.C.resize(2);
    ss.C << 1.0, 0.46;
    ss.D = 0.0;
    return ss;
}

LuryeSystem deadzone_loop(double g) {
    LuryeSystem s;
    s.plant = printed_realization(g);
    s.phi = Deadzone{0.2};
    s.r2 = SignalSpec::periodic_table(kExcitation);
    s.x0 = {0.0, 0.0};
    return s;
}

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::ConfigError;
}

}  // namespace

TEST(Discrete, SteadyCycleAtSevenTenths) {
    const auto r = simulate_discrete(deadzone_loop(0.7), 2000, {1995, 1, false});
    const double cycle[] = {0.2282, -0.2861, -0.6895, 0.0, 0.7464};
    ASSERT_EQ(r.size(), 5u);
    // index 1995 is a multiple of 5, aligned with r2[0]
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(r.y2[static_cast<std::size_t>(i)], cycle[i], 5e-5) << i;
}

TEST(Discrete, ZeroLoopStaysZero) {
    LuryeSystem s;
    s.plant = printed_realization(0.7);
    const auto r = simulate_discrete(s, 50);
    for (std::size_t i = 0; i < r.size(); ++i) {
        EXPECT_EQ(r.y1[i], 0.0);
        EXPECT_EQ(r.y2[i], 0.0);
        EXPECT_EQ(r.u1[i], 0.0);
        EXPECT_EQ(r.u2[i], 0.0);
    }
}

TEST(Discrete, LoopEquationsAndReplayFromStoredState) {
    const auto sys = deadzone_loop(0.9);
    const auto r = simulate_discrete(sys, 300, {0, 1, true});
    ASSERT_EQ(r.states.size(), r.size());
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        const Eigen::Map<const Eigen::VectorXd> x(r.states[i].data(), 2);
        const double y1 = sys.plant.C.dot(x);
        EXPECT_EQ(y1, r.y1[i]);
        EXPECT_EQ(r.u2[i], y1 + sys.r2(r.time[i]));
        EXPECT_EQ(r.y2[i], sys.phi(r.time[i], r.u2[i]));
        EXPECT_EQ(r.u1[i], -r.y2[i]);
        const Eigen::VectorXd next = sys.plant.A * x + sys.plant.B * r.u1[i];
        EXPECT_EQ(next(0), r.states[i + 1][0]);
        EXPECT_EQ(next(1), r.states[i + 1][1]);
    }
}

TEST(Discrete, Deterministic) {
    auto sys = deadzone_loop(0.9);
    sys.r1 = SignalSpec::noise(42, 0.1);
    const auto a = simulate_discrete(sys, 5000);
    const auto b = simulate_discrete(sys, 5000);
    EXPECT_EQ(a.y2, b.y2);
    EXPECT_EQ(a.final_state, b.final_state);
}

TEST(Discrete, DivergenceGuard) {
    LuryeSystem s;
    s.plant = printed_realization(1.0);
    s.plant.A(0, 0) = 3.0;
    s.phi = LinearGain{0.0};
    s.x0 = {1.0, 0.0};
    EXPECT_EQ(code_of([&] { (void)simulate_discrete(s, 1000); }), ErrorCode::NonfiniteState);
}

TEST(Discrete, NineTenthsHasNoPeriodFiveSettling) {
    const auto r = simulate_discrete(deadzone_loop(0.9), 200000, {1000, 1, false});
    EXPECT_FALSE(detect_period(r.y2, 5.0, 64, 1e-6).multiple.has_value());
}

TEST(Continuous, LinearResponseFromRest) {
    // saturation never engaged from x0 = 0: matches the linear loop
    const RationalTransferFunction G{Domain::continuous, {1.0}, {1.0, 100.1, 11.0, 100.0}, 50.0};
    LuryeSystem sat, lin;
    sat.plant = lin.plant = to_state_space(G);
    sat.phi = Saturation{1.0};
    lin.phi = LinearGain{1.0};
    sat.r2 = lin.r2 = SignalSpec::sinusoid(0.3, 2.0);
    const double h = std::numbers::pi / 3142.0;
    const auto a = simulate_continuous_rk4(sat, h, 400.0 * std::numbers::pi, {3142 * 200, 1, false});
    const auto b = simulate_continuous_rk4(lin, h, 400.0 * std::numbers::pi, {3142 * 200, 1, false});
    double peak = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        peak = std::max(peak, std::abs(a.u2[i]));
        diff = std::max(diff, std::abs(a.y2[i] - b.y2[i]));
    }
    EXPECT_LT(peak, 1.0);
    EXPECT_EQ(diff, 0.0);
    const auto pr = detect_period(a.y2, 3142.0, 3, 1e-4);
    ASSERT_TRUE(pr.multiple.has_value());
    EXPECT_EQ(*pr.multiple, 1);
}

TEST(Continuous, Rk4OrderOnLinearDecay) {
    // x' = -x + u1, u1 = -y2 = -x: x' = -2x
    StateSpaceRealization ss;
    ss.domain = Domain::continuous;
    ss.A = Eigen::MatrixXd::Constant(1, 1, -1.0);
    ss.B = Eigen::VectorXd::Constant(1, 1.0);
    ss.C = Eigen::RowVectorXd::Constant(1, 1.0);
    LuryeSystem s;
    s.plant = ss;
    s.phi = LinearGain{1.0};
    s.x0 = {1.0};
    const auto r1 = simulate_continuous_rk4(s, 0.01, 1.0, {});
    const auto r2 = simulate_continuous_rk4(s, 0.005, 1.0, {});
    const double exact = std::exp(-2.0);
    const double e1 = std::abs(r1.final_state[0] - exact), e2 = std::abs(r2.final_state[0] - exact);
    EXPECT_LT(e1, 1e-8);
    EXPECT_NEAR(e1 / e2, 16.0, 1.0);
}

TEST(Continuous, AlgebraicLoopRejected) {
    StateSpaceRealization ss;
    ss.domain = Domain::continuous;
    ss.A = Eigen::MatrixXd::Constant(1, 1, -1.0);
    ss.B = Eigen::VectorXd::Constant(1, 1.0);
    ss.C = Eigen::RowVectorXd::Constant(1, 1.0);
    ss.D = 0.5;
    LuryeSystem s;
    s.plant = ss;
    EXPECT_EQ(code_of([&] { (void)simulate_continuous_rk4(s, 0.01, 1.0, {}); }), ErrorCode::AlgebraicLoop);
}

TEST(Period, Examples) {
    const auto r = simulate_discrete(deadzone_loop(0.7), 2000, {1000, 1, false});
    const auto p = detect_period(r.y2, 5.0, 8, 1e-6);
    ASSERT_TRUE(p.multiple.has_value());
    EXPECT_EQ(*p.multiple, 1);
    std::vector<double> three(3000);
    for (std::size_t i = 0; i < three.size(); ++i) three[i] = std::sin(2.0 * std::numbers::pi * i / 30.0);
    const auto q = detect_period(three, 10.0, 5, 1e-9);
    ASSERT_TRUE(q.multiple.has_value());
    EXPECT_EQ(*q.multiple, 3);
    EXPECT_EQ(code_of([&] { (void)detect_period(std::vector<double>(20, 1.0), 10.0, 3, 1e-6); }),
              ErrorCode::WindowTooShort);
}

TEST(Power, Examples) {
    std::vector<double> r2(5000);
    for (std::size_t i = 0; i < r2.size(); ++i) r2[i] = kExcitation[i % 5];
    EXPECT_NEAR(power_seminorm(r2, PowerMode::period_exact, 5.0, 4, 1e-9), 0.7376, 5e-5);
    const auto r = simulate_discrete(deadzone_loop(0.7), 2000, {1000, 1, false});
    const double py = power_seminorm(r.y2, PowerMode::period_exact, 5.0, 4, 1e-6);
    EXPECT_NEAR(py, 0.4830, 5e-5);
    EXPECT_LT(py / 0.7376, 5.73);
    EXPECT_EQ(power_seminorm(std::vector<double>(100, 0.0)), 0.0);
}

TEST(Power, PeriodExactNeedsSettledTrace) {
    std::vector<double> y(4000);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (double& v : y) v = U(rng);
    EXPECT_EQ(code_of([&] { (void)power_seminorm(y, PowerMode::period_exact, 5.0, 4, 1e-6); }), ErrorCode::NotSettled);
}

TEST(Bias, StepResponseMatchesFixedPoint) {
    for (double g : {0.6, 0.8}) {
        LuryeSystem s;
        s.plant = printed_realization(g);
        s.phi = Saturation{1.0};
        s.r2 = SignalSpec::constant(2.0);
        const auto r = simulate_discrete(s, 3000, {2000, 1, false});
        const RationalTransferFunction G{Domain::discrete, {2.0, 0.92}, {1.0, -0.5, 0.0}, g};
        EXPECT_NEAR(bias_estimate(r.y2), steady_state_map(G, Saturation{1.0}, 2.0).y2, 1e-6) << g;
    }
    std::vector<double> sine(4000);
    for (std::size_t i = 0; i < sine.size(); ++i) sine[i] = std::sin(2.0 * std::numbers::pi * i / 40.0);
    EXPECT_NEAR(bias_estimate(sine), 0.0, 1e-9);
}

TEST(Lyapunov, LinearContraction) {
    LuryeSystem s;
    s.plant = printed_realization(1.0);
    s.x0 = {1.0, 1.0};
    EXPECT_NEAR(lyapunov_exponent(s, 2000, 1e-8, 10).exponent, -std::log(2.0), 1e-3);
}

TEST(Lyapunov, PeriodicRegimeIsNegative) {
    EXPECT_LT(lyapunov_exponent(deadzone_loop(0.7), 20000, 1e-8, 1000).exponent, 0.0);
}

TEST(Spectrum, SingleTone) {
    const std::size_t L = 1u << 16;
    std::vector<double> y(L);
    // 1638 cycles in L samples: period close to 40 and bin-exact
    for (std::size_t i = 0; i < L; ++i) y[i] = std::cos(2.0 * std::numbers::pi * 1638.0 * i / L);
    const auto s = spectrum(y, L);
    EXPECT_LT(s.parseval_residual, 1e-9);
    const double peak = s.magnitude[1638];
    EXPECT_NEAR(peak, L / 2.0, 1e-6 * L);
    for (std::size_t k = 0; k < L; ++k) {
        if (k != 1638 && k != L - 1638) {
            EXPECT_LT(s.magnitude[k], 1e-9 * peak) << k;
        }
    }
}

TEST(Spectrum, ZeroAndErrors) {
    const auto s = spectrum(std::vector<double>(64, 0.0), 64);
    for (double m : s.magnitude) EXPECT_EQ(m, 0.0);
    EXPECT_EQ(code_of([] { (void)spectrum(std::vector<double>(100, 1.0), 48); }), ErrorCode::LengthNotPowerOfTwo);
}

TEST(Decompose, PeriodicAndNoise) {
    std::vector<double> y(40 * 500);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::sin(2.0 * std::numbers::pi * (i % 40) / 40.0) + 0.1;
    const auto d = decompose_periodic(y, 40);
    EXPECT_LT(d.residual_power, 1e-12);
    std::mt19937_64 rng(99);
    std::normal_distribution<double> N(0.0, 1.0);
    std::vector<double> noise(40 * 10000);
    for (double& v : noise) v = N(rng);
    const auto n = decompose_periodic(noise, 40);
    // per-phase means shrink like 1/sqrt(count)
    EXPECT_LT(n.periodic_power, 3.0 / std::sqrt(10000.0));
    EXPECT_NEAR(n.residual_power, 1.0, 0.02);
    EXPECT_EQ(code_of([&] { (void)decompose_periodic(std::vector<double>(400, 1.0), 40); }), ErrorCode::WindowTooShort);
}

TEST(Deviation, TransformedLoopReproducesDifference) {
    // periodic solution y* from the settled g = 0.7 loop; the deviation loop with
    // phi_d(n, x) = Q(x + u2*(n)) - Q(u2*(n)) driven by r2 - r2 = 0 tracks y2 - y2*
    const double g = 0.7;
    const auto settled = simulate_discrete(deadzone_loop(g), 2000, {1995, 1, true});
    std::vector<double> offsets(settled.u2.begin(), settled.u2.end());
    LuryeSystem dev;
    dev.plant = printed_realization(g);
    dev.phi = PeriodicOffset{Deadzone{0.2}, offsets, 1.0};
    const std::vector<double> xs = settled.states[0];
    LuryeSystem orig = deadzone_loop(g);
    orig.x0 = {xs[0] + 0.3, xs[1] - 0.2};
    dev.x0 = {0.3, -0.2};
    const auto a = simulate_discrete(orig, 200);
    const auto b = simulate_discrete(dev, 200);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double star = settled.y2[i % 5];
        EXPECT_NEAR(a.y2[i] - star, b.y2[i], 1e-12) << i;
    }
}

TEST(Hunt, InitialGridSize) {
    const auto grid = initial_state_grid(3, {1.0, 10.0, 100.0});
    EXPECT_EQ(grid.size(), 79u);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        double n = 0.0;
        for (double v : grid[i]) n += v * v;
        const double r = std::sqrt(n);
        EXPECT_TRUE(std::abs(r - 1.0) < 1e-12 || std::abs(r - 10.0) < 1e-11 || std::abs(r - 100.0) < 1e-10);
    }
}
