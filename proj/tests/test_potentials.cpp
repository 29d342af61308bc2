#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "grin/potentials.hpp"
#include "grin/spectral.hpp"

using namespace grin;

namespace {
constexpr double kPi = std::numbers::pi;
const Grid1D kTophatGrid(-5.0 * kPi, 5.0 * kPi, 1024);
}  // namespace

TEST(PoschlTeller, DepthAtCenter) {
    const Grid1D g(-8.0, 8.0, 64);  // x = 0 is a grid point
    EXPECT_DOUBLE_EQ(poschl_teller(1.0, 0.0, g)[32], -1.0);
    EXPECT_DOUBLE_EQ(poschl_teller(3.0, 0.0, g)[32], -6.0);
}

TEST(PoschlTeller, DecaysFarFromCenter) {
    const Grid1D g(-30.0, 30.0, 64);
    for (double sigma : {0.5, 1.0, 3.0, 5.0}) {
        for (std::size_t j : {std::size_t{10}, std::size_t{40}}) {
            const double x = g.x(j);
            EXPECT_LT(std::abs(poschl_teller(sigma, x - 20.0, g)[j]), 1e-15);
            EXPECT_LT(std::abs(poschl_teller(sigma, x + 20.0, g)[j]), 1e-15);
        }
    }
}

TEST(PoschlTeller, SigmaOneIsMinusSechSquared) {
    const auto v = poschl_teller(1.0, 0.0, kTophatGrid);
    for (std::size_t j = 0; j < kTophatGrid.n(); ++j) {
        const double s = sech(kTophatGrid.x(j));
        EXPECT_NEAR(v[j], -s * s, 1e-15);
    }
    EXPECT_THROW(poschl_teller(0.0, 0.0, kTophatGrid), ContractError);
}

TEST(TophatTarget, NormalizedAndEven) {
    const Field f = tophat_target(1e-3, 8, kTophatGrid);
    EXPECT_NEAR(norm(f, kTophatGrid), 1.0, 1e-10);
    const std::size_t n = kTophatGrid.n();
    // x_j and x_{n-j} are mirror points on the symmetric periodic grid.
    for (std::size_t j = 1; j < n; ++j) EXPECT_LT(std::abs(f[j] - f[n - j]), 1e-14);
    // Value at x = 0 is the normalization constant A.
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(-2e-3 * std::pow(kTophatGrid.x(j), 8)) * kTophatGrid.dx();
    EXPECT_NEAR(f[n / 2].real(), 1.0 / std::sqrt(s), 1e-12);
}

TEST(TophatTarget, NormalizationSweep) {
    for (double a : {1e-4, 1e-3, 1e-2, 1e-1})
        for (int m : {2, 4, 8}) EXPECT_NEAR(norm(tophat_target(a, m, kTophatGrid), kTophatGrid), 1.0, 1e-10);
    EXPECT_THROW(tophat_target(1e-3, 3, kTophatGrid), ContractError);
    EXPECT_THROW(tophat_target(-1.0, 8, kTophatGrid), ContractError);
}

TEST(BeamCombine, ThreeWellsAndUnitNorm) {
    const Grid1D g(-15.0 * kPi, 15.0 * kPi, 4096);
    const auto [v, phi] = beam_combine_initial(10.0, g);
    EXPECT_NEAR(norm(phi, g), 1.0, 1e-10);
    // Local minima of V sit at -10, 0, 10.
    std::vector<double> minima;
    for (std::size_t j = 1; j + 1 < g.n(); ++j)
        if (v[j] < v[j - 1] && v[j] <= v[j + 1]) minima.push_back(g.x(j));
    ASSERT_EQ(minima.size(), 3u);
    EXPECT_NEAR(minima[0], -10.0, g.dx());
    EXPECT_NEAR(minima[1], 0.0, g.dx());
    EXPECT_NEAR(minima[2], 10.0, g.dx());
}

TEST(BeamCombine, ApproximateEigenfunction) {
    const Grid1D g(-15.0 * kPi, 15.0 * kPi, 4096);
    const auto [v, phi] = beam_combine_initial(10.0, g);
    Field h = second_derivative_fourier(phi, g);
    for (std::size_t j = 0; j < g.n(); ++j) h[j] = -0.5 * h[j] + v[j] * phi[j];
    const double lambda = inner_product(phi, h, g).real();
    Field r(g.n());
    for (std::size_t j = 0; j < g.n(); ++j) r[j] = h[j] - lambda * phi[j];
    EXPECT_NEAR(lambda, -0.5, 1e-3);
    EXPECT_LT(norm(r, g), 1e-3);
}

namespace {
SeparableTimeline make_separable(const AxialGrid& ax, const Grid1D& g) {
    return SeparableTimeline(poschl_teller(1.0, 0.0, g), poschl_teller(3.0, 1.0, g), Control::ramp(ax, 1.0, 0.0),
                             Control::ramp(ax, 0.0, 1.0));
}
}  // namespace

TEST(AssembleSlice, SeparableEndpointsAndMidpoint) {
    const Grid1D g(-10.0, 10.0, 64);
    const AxialGrid ax(0.0, 7.0, 100);
    const SeparableTimeline tl = make_separable(ax, g);
    EXPECT_EQ(assemble_slice(tl, 0.0).values, tl.v0.values);
    EXPECT_EQ(assemble_slice(tl, 7.0).values, tl.vl.values);
    const auto mid = assemble_slice(tl, 3.5);
    for (std::size_t j = 0; j < g.n(); ++j) EXPECT_NEAR(mid[j], 0.5 * (tl.v0[j] + tl.vl[j]), 1e-15);
    EXPECT_THROW(assemble_slice(tl, 7.5), ContractError);
    EXPECT_THROW(assemble_slice(tl, -0.1), ContractError);
}

TEST(AssembleSlice, LinearInControls) {
    const Grid1D g(-10.0, 10.0, 64);
    const AxialGrid ax(0.0, 2.0, 40);
    const auto v0 = poschl_teller(1.0, 0.0, g);
    const auto vl = harmonic(0.7, g);
    const SeparableTimeline base(v0, vl, Control::ramp(ax, 1.0, 0.0), Control::ramp(ax, 0.0, 1.0));
    RealVector u2 = base.u.samples(), w2 = base.v.samples();
    for (auto& x : u2) x *= 2.0;
    for (auto& x : w2) x *= 2.0;
    // The doubled controls violate the boundary values, so build their slice by hand.
    const Control cu(ax, u2), cv(ax, w2);
    for (double z : {0.3, 1.05, 1.77}) {
        const auto s1 = assemble_slice(base, z);
        for (std::size_t j = 0; j < g.n(); ++j) EXPECT_EQ(cu.at(z) * v0[j] + cv.at(z) * vl[j], 2.0 * s1[j]);
    }
}

TEST(AssembleSlice, TabulatedInterpolatesLinearly) {
    const Grid1D g(-10.0, 10.0, 64);
    const AxialGrid ax(0.0, 1.0, 4);
    RealVector vals(g.n() * ax.n_samples());
    for (std::size_t k = 0; k < ax.n_samples(); ++k)
        for (std::size_t j = 0; j < g.n(); ++j) vals[k * g.n() + j] = static_cast<double>(k) + g.x(j);
    const TabulatedTimeline tl(ax, g.n(), vals);
    const auto s = assemble_slice(tl, 0.375);  // 1.5 slices in
    for (std::size_t j = 0; j < g.n(); ++j) EXPECT_NEAR(s[j], 1.5 + g.x(j), 1e-13);
    EXPECT_EQ(assemble_slice(tl, 1.0).values, RealVector(tl.slice(4).begin(), tl.slice(4).end()));
}

TEST(Tabulate, BoundarySlicesMatchSeparable) {
    const Grid1D g(-10.0, 10.0, 64);
    const AxialGrid ax(0.0, 7.0, 70);
    const SeparableTimeline sep = make_separable(ax, g);
    const TabulatedTimeline tab = tabulate(sep);
    for (std::size_t j = 0; j < g.n(); ++j) {
        EXPECT_EQ(tab.at(j, 0), sep.v0[j]);
        EXPECT_EQ(tab.at(j, 70), sep.vl[j]);
    }
}

TEST(SeparableTimeline, RejectsWrongBoundaryValues) {
    const Grid1D g(-10.0, 10.0, 64);
    const AxialGrid ax(0.0, 1.0, 10);
    EXPECT_THROW(SeparableTimeline(poschl_teller(1.0, 0.0, g), poschl_teller(1.0, 0.0, g), Control::ramp(ax, 0.0, 1.0),
                                   Control::ramp(ax, 0.0, 1.0)),
                 ContractError);
}
