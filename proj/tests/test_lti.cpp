#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "lurye/lti.hpp"

using namespace lurye;

namespace {

RationalTransferFunction discrete_plant(double g = 1.0) { return {Domain::discrete, {2.0, 0.92}, {1.0, -0.5, 0.0}, g}; }
RationalTransferFunction third_order(double g) { return {Domain::continuous, {1.0}, {1.0, 100.1, 11.0, 100.0}, g}; }

/// Random stable tf of the given degree from random poles and a proper numerator.
RationalTransferFunction random_stable(std::mt19937_64& rng, Domain d, int degree) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> den{1.0};
    int placed = 0;
    while (placed < degree) {
        if (degree - placed >= 2 && U(rng) > 0.0) {
            // complex pair
            double re, im;
            if (d == Domain::continuous) {
                re = -0.05 - 2.0 * std::abs(U(rng));
                im = 3.0 * U(rng);
            } else {
                const double r = 0.9 * std::abs(U(rng)), th = std::numbers::pi * U(rng);
                re = r * std::cos(th);
                im = r * std::sin(th);
            }
            den = poly::multiply(den, std::vector<double>{1.0, -2.0 * re, re * re + im * im});
            placed += 2;
        } else {
            const double p = d == Domain::continuous ? -0.05 - 3.0 * std::abs(U(rng)) : 0.9 * U(rng);
            den = poly::multiply(den, std::vector<double>{1.0, -p});
            placed += 1;
        }
    }
    std::vector<double> num(static_cast<std::size_t>(degree) + 1);
    for (double& c : num) c = U(rng);
    return {d, num, den, 1.0 + std::abs(U(rng))};
}

}  // namespace

TEST(FrequencyResponse, DiscretePlantAtZeroFrequency) {
    const Complex v = discrete_plant()(0.0);
    EXPECT_NEAR(v.real(), 5.84, 1e-12);
    EXPECT_NEAR(v.imag(), 0.0, 1e-15);
}

TEST(FrequencyResponse, ConstantIsOne) {
    const auto one = RationalTransferFunction::constant(Domain::continuous, 1.0);
    for (double w : {0.0, 0.3, 17.0, -4.0}) EXPECT_EQ(one(w), Complex(1.0, 0.0));
}

TEST(FrequencyResponse, LeadPhaseAtOneThird) {
    const RationalTransferFunction M{Domain::continuous, {9.0, 1.0}, {1e-6, 1.0}};
    const Complex direct = Complex(1.0, 3.0) / Complex(1.0, 1e-6 / 3.0);
    EXPECT_NEAR(std::arg(M(1.0 / 3.0)), std::arg(direct), 1e-14);
    EXPECT_NEAR(std::arg(M(1.0 / 3.0)), std::atan(3.0), 1e-6);
}

TEST(FrequencyResponse, PoleOnContourThrows) {
    const RationalTransferFunction integrator{Domain::continuous, {1.0}, {1.0, 0.0}};
    try {
        (void)integrator(0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::PoleOnEvaluationContour);
    }
}

TEST(FrequencyResponse, ConjugateSymmetryAndPeriodicity) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        const auto Gc = random_stable(rng, Domain::continuous, 1 + i % 5);
        const auto Gd = random_stable(rng, Domain::discrete, 1 + i % 5);
        for (double w : {0.01, 0.7, 2.5, 31.0}) {
            EXPECT_EQ(Gc(-w), std::conj(Gc(w)));
            EXPECT_EQ(Gd(-w), std::conj(Gd(w)));
            const double wd = std::fmod(w, std::numbers::pi);
            EXPECT_LT(std::abs(Gd(wd + 2.0 * std::numbers::pi) - Gd(wd)), 1e-12 * (1.0 + std::abs(Gd(wd))));
        }
    }
}

TEST(Stability, ThirdOrderPlantIsStable) {
    const auto r = is_stable(third_order(909.0));
    EXPECT_TRUE(r.stable());
    EXPECT_EQ(r.poles.size(), 3u);
}

TEST(Stability, DiscretePlantPoles) {
    const auto r = is_stable(discrete_plant());
    ASSERT_TRUE(r.stable());
    std::vector<double> mags;
    for (auto p : r.poles) mags.push_back(std::abs(p));
    std::sort(mags.begin(), mags.end());
    EXPECT_NEAR(mags[0], 0.0, 1e-12);
    EXPECT_NEAR(mags[1], 0.5, 1e-12);
}

TEST(Stability, RightHalfPlanePole) {
    const auto r = is_stable({Domain::continuous, {1.0}, {1.0, -1.0}});
    EXPECT_EQ(r.verdict, StabilityVerdict::unstable);
    ASSERT_EQ(r.poles.size(), 1u);
    EXPECT_NEAR(r.poles[0].real(), 1.0, 1e-12);
}

TEST(Stability, BoundaryPoleIsMarginal) {
    EXPECT_EQ(is_stable({Domain::continuous, {1.0}, {1.0, 0.0, 1.0}}).verdict, StabilityVerdict::marginally_stable);
    EXPECT_EQ(is_stable({Domain::discrete, {1.0}, {1.0, -1.0}}).verdict, StabilityVerdict::marginally_stable);
}

TEST(Stability, RepeatedPolesKeepMultiplicity) {
    const auto r = is_stable({Domain::continuous, {1.0}, {1.0, 2.0, 1.0}});
    EXPECT_EQ(r.poles.size(), 2u);
    for (auto p : r.poles) EXPECT_NEAR(p.real(), -1.0, 1e-6);
}

TEST(DcGain, Examples) {
    EXPECT_NEAR(dc_gain(discrete_plant(0.7)), 4.088, 1e-12);
    EXPECT_NEAR(dc_gain(third_order(909.0)), 9.09, 1e-12);
    const RationalTransferFunction printed{Domain::continuous, {1.0}, {1.0, 101.0, 100.1, 10.0}, 909.0};
    EXPECT_NEAR(dc_gain(printed), 90.9, 1e-10);
    EXPECT_TRUE(is_stable(printed).stable());
    EXPECT_EQ(dc_gain(RationalTransferFunction::constant(Domain::continuous, 0.0)), 0.0);
}

TEST(StateSpace, DiscretePlantRealizationAgreesWithPrintedForm) {
    const double g = 0.7;
    const auto ss = to_state_space(discrete_plant(g));
    ASSERT_EQ(ss.order(), 2);
    EXPECT_TRUE(ss.minimal);
    EXPECT_EQ(ss.D, 0.0);
    Eigen::MatrixXd A(2, 2);
    A << 0.5, 0.0, 1.0, 0.0;
    Eigen::VectorXd B(2);
    B << 2.0 * g, 0.0;
    Eigen::RowVectorXd C(2);
    C << 1.0, 0.46;
    Eigen::MatrixXd Ak = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd Sk = Eigen::MatrixXd::Identity(2, 2);
    for (int k = 0; k < 8; ++k) {
        EXPECT_NEAR((ss.C * Sk * ss.B).value(), (C * Ak * B).value(), 1e-13) << k;
        Ak = Ak * A;
        Sk = Sk * ss.A;
    }
}

TEST(StateSpace, ConstantHasFeedthroughOnly) {
    const auto ss = to_state_space(RationalTransferFunction::constant(Domain::discrete, 2.5));
    EXPECT_EQ(ss.order(), 0);
    EXPECT_EQ(ss.D, 2.5);
    EXPECT_EQ(frequency_response(ss, 1.0), Complex(2.5, 0.0));
}

TEST(StateSpace, ImproperThrows) {
    try {
        (void)to_state_space({Domain::continuous, {1.0, 0.0, 0.0}, {1.0, 1.0}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ImproperTransferFunction);
    }
}

TEST(StateSpace, RealizationFidelityOnRandomPlants) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 40; ++i) {
        const Domain d = i % 2 ? Domain::discrete : Domain::continuous;
        const auto G = random_stable(rng, d, 1 + i % 5);
        const auto ss = to_state_space(G);
        ASSERT_TRUE(ss.consistent());
        const auto grid = default_grid(d);
        const std::size_t stride = std::max<std::size_t>(1, grid.points.size() / 1024);
        for (std::size_t k = 0; k < grid.points.size(); k += stride) {
            const double w = grid.points[k];
            const Complex a = G(w), b = frequency_response(ss, w);
            EXPECT_LT(std::abs(a - b), 1e-8 * std::max(1.0, std::abs(a))) << "plant " << i << " w " << w;
        }
    }
}

TEST(StateSpace, MarkovParametersOfDiscreteRealization) {
    // h0 = D, h1 = CB, h2 = CAB ... against long division of num/den
    const auto G = discrete_plant(0.9);
    const auto ss = to_state_space(G);
    // G(z) = 0.9 (2 z^-1 + 0.92 z^-2) / (1 - 0.5 z^-1)
    std::vector<double> h(6, 0.0);
    const double b[] = {0.0, 1.8, 0.9 * 0.92};
    for (int n = 0; n < 6; ++n) {
        h[n] = (n < 3 ? b[n] : 0.0) + (n >= 1 ? 0.5 * h[n - 1] : 0.0);
    }
    Eigen::VectorXd x = ss.B;
    EXPECT_NEAR(ss.D, h[0], 1e-14);
    for (int n = 1; n < 6; ++n) {
        EXPECT_NEAR(ss.C.dot(x), h[n], 1e-12) << n;
        x = ss.A * x;
    }
}

TEST(Grid, DefaultsAreSortedAndBounded) {
    const auto c = continuous_grid();
    const auto d = discrete_grid();
    ASSERT_FALSE(c.points.empty());
    EXPECT_EQ(d.points.size(), 4096u);
    EXPECT_TRUE(std::is_sorted(c.points.begin(), c.points.end()));
    EXPECT_TRUE(std::adjacent_find(c.points.begin(), c.points.end()) == c.points.end());
    EXPECT_GE(d.points.front(), 0.0);
    EXPECT_LE(d.points.back(), std::numbers::pi);
    EXPECT_EQ(c.points.front(), 0.0);
    EXPECT_NEAR(c.points[1], 1e-3, 1e-12);
    EXPECT_NEAR(c.points.back(), 1e4, 1e-6);
}

TEST(Grid, PhaseRefinementAddsPointsWhereNeeded) {
    const auto G = third_order(909.0);
    const auto base = continuous_grid(50.0);
    const auto refined = refine_by_phase(base, [&](double w) { return 1.0 + G(w); });
    EXPECT_GT(refined.points.size(), base.points.size());
    EXPECT_TRUE(std::is_sorted(refined.points.begin(), refined.points.end()));
}
