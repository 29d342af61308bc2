#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "grin/controls.hpp"

using namespace grin;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST(Control, EndpointsPinned) {
    const AxialGrid ax(0.0, 7.0, 100);
    const Control r = Control::ramp(ax, 1.0, 0.0);
    EXPECT_EQ(r.samples().front(), 1.0);
    EXPECT_EQ(r.samples().back(), 0.0);
    RealVector bad = r.samples();
    bad.front() = 0.5;
    EXPECT_THROW(Control(ax, bad, 1.0, 0.0), ContractError);
    EXPECT_THROW(Control(ax, RealVector(10, 0.0)), ContractError);
}

TEST(Ansatz, ZeroCoefficientsGiveRamp) {
    const AxialGrid ax(0.0, 7.0, 700);
    const Control c = evaluate_ansatz(AnsatzCoefficients{RealVector(15, 0.0), 0.25, -1.5, 0.0, 7.0}, ax);
    const Control r = Control::ramp(ax, 0.25, -1.5);
    for (std::size_t k = 0; k < ax.n_samples(); ++k) EXPECT_NEAR(c.samples()[k], r.samples()[k], 1e-15);
}

TEST(Ansatz, EndpointsExactForAnyCoefficients) {
    const AxialGrid ax(2.0, 9.0, 333);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto co = sample_random_coefficients(seed, 15, 0.3, 0.7, 2.0, 9.0);
        const Control c = evaluate_ansatz(co, ax);
        EXPECT_EQ(c.samples().front(), 0.3);
        EXPECT_EQ(c.samples().back(), 0.7);
        for (double v : c.samples()) EXPECT_TRUE(std::isfinite(v));
    }
}

TEST(Ansatz, SingleModeAtMidpoint) {
    const AxialGrid ax(0.0, 7.0, 700);
    RealVector eps(15, 0.0);
    eps[0] = 1.0;
    const Control c = evaluate_ansatz(AnsatzCoefficients{eps, 0.0, 0.0, 0.0, 7.0}, ax);
    EXPECT_NEAR(c.samples()[350], 1.0, 1e-15);
}

TEST(Ansatz, LinearInCoefficients) {
    const AxialGrid ax(0.0, 3.0, 90);
    const auto a = sample_random_coefficients(1, 15, 0.0, 0.0, 0.0, 3.0);
    const auto b = sample_random_coefficients(2, 15, 0.0, 0.0, 0.0, 3.0);
    AnsatzCoefficients sum = a;
    for (std::size_t j = 0; j < 15; ++j) sum.eps[j] = 2.0 * a.eps[j] - 0.5 * b.eps[j];
    const Control ca = evaluate_ansatz(a, ax), cb = evaluate_ansatz(b, ax), cs = evaluate_ansatz(sum, ax);
    for (std::size_t k = 0; k < ax.n_samples(); ++k)
        EXPECT_NEAR(cs.samples()[k], 2.0 * ca.samples()[k] - 0.5 * cb.samples()[k], 1e-14);
}

TEST(Ansatz, AllOnesBound) {
    const AxialGrid ax(0.0, 7.0, 2000);
    const Control c = evaluate_ansatz(AnsatzCoefficients{RealVector(15, 1.0), 0.0, 0.0, 0.0, 7.0}, ax);
    double m = 0.0;
    for (double v : c.samples()) m = std::max(m, std::abs(v));
    EXPECT_LE(m, kPi * kPi / 6.0);
}

TEST(Ansatz, IntervalMismatchThrows) {
    const AxialGrid ax(0.0, 7.0, 100);
    EXPECT_THROW(evaluate_ansatz(AnsatzCoefficients{RealVector(3, 0.0), 0.0, 1.0, 0.0, 6.0}, ax), ContractError);
}

TEST(RandomCoefficients, Deterministic) {
    const auto a = sample_random_coefficients(42, 15);
    const auto b = sample_random_coefficients(42, 15);
    EXPECT_EQ(a.eps, b.eps);
    EXPECT_NE(a.eps, sample_random_coefficients(43, 15).eps);
}

TEST(RandomCoefficients, UniformOnUnitInterval) {
    double mean = 0.0;
    double lo = 1.0, hi = -1.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double e = sample_random_coefficients(static_cast<std::uint64_t>(i) + 1000, 1).eps[0];
        mean += e;
        lo = std::min(lo, e);
        hi = std::max(hi, e);
    }
    mean /= n;
    EXPECT_LT(std::abs(mean), 0.02);
    EXPECT_GE(lo, -1.0);
    EXPECT_LE(hi, 1.0);
    EXPECT_LT(lo, -0.99);
    EXPECT_GT(hi, 0.99);
}

TEST(Projection, RampHasZeroCoefficients) {
    const AxialGrid ax(0.0, 7.0, 500);
    const auto c = control_to_coefficients(Control::ramp(ax, 1.0, 0.0));
    for (double e : c.eps) EXPECT_LT(std::abs(e), 1e-10);
}

TEST(Projection, RoundTripInSpan) {
    const AxialGrid ax(0.0, 7.0, 500);
    const auto co = sample_random_coefficients(9, 15, 1.0, 0.0, 0.0, 7.0);
    const auto back = control_to_coefficients(evaluate_ansatz(co, ax));
    for (std::size_t j = 0; j < 15; ++j) EXPECT_NEAR(back.eps[j], co.eps[j], 1e-8);
    EXPECT_EQ(back.u0, 1.0);
    EXPECT_EQ(back.ul, 0.0);
}

TEST(Projection, OutOfSpanResidualIsTheTail) {
    const AxialGrid ax(0.0, 7.0, 400);
    const auto co = sample_random_coefficients(5, 15, 0.0, 1.0, 0.0, 7.0);
    const Control in_span = evaluate_ansatz(co, ax);
    RealVector tail(ax.n_samples());
    RealVector s = in_span.samples();
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double t = (ax.z(k) - ax.z0()) / ax.length();
        tail[k] = 0.3 * std::sin(23.0 * kPi * t) - 0.1 * std::sin(40.0 * kPi * t);
        if (k == 0 || k + 1 == s.size()) tail[k] = 0.0;
        s[k] += tail[k];
    }
    const Control mixed(ax, s, 0.0, 1.0);
    const Control rebuilt = evaluate_ansatz(control_to_coefficients(mixed, 15), ax);
    double resid = 0.0, tail_energy = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double r = s[k] - rebuilt.samples()[k];
        EXPECT_NEAR(r, tail[k], 1e-10);
        resid += r * r;
        tail_energy += tail[k] * tail[k];
    }
    EXPECT_NEAR(resid, tail_energy, 1e-10 * tail_energy);
}
