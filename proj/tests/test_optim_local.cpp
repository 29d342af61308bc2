#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "grin/optim_global.hpp"
#include "grin/optim_local.hpp"
#include "grin/pipeline.hpp"
#include "grin/poisson2d.hpp"

using namespace grin;

namespace {
constexpr double kPi = std::numbers::pi;

Trajectory zero_trajectory(const Grid1D& g, const AxialGrid& ax) {
    return Trajectory{g, ax, 1, std::vector<cplx>(g.n() * ax.n_samples())};
}

ControlProblem tophat_problem(const TophatOptions& opt) {
    const ProblemSpec spec = preset_tophat(opt);
    const StageSpec& st = spec.stages.front();
    return ControlProblem{spec.grid, AxialGrid(st.z0, st.z1, st.n_steps), st.v_initial, st.v_terminal,
                          st.phi0, st.phi_d, spec.gamma_1d};
}

const ControlProblem& full_tophat() {
    static const ControlProblem prob = tophat_problem(TophatOptions{});
    return prob;
}

const ControlProblem& small_tophat() {
    static const ControlProblem prob = tophat_problem(TophatOptions{512, 700, 1e-3, 8});
    return prob;
}

// Small two-well problem used for the (x, z) refinement checks.
struct Small2D {
    Grid1D grid{-20.0, 20.0, 128};
    AxialGrid tab{0.0, 4.0, 20};
    PotentialProblem prob;
    TabulatedTimeline v;

    Small2D()
        : prob{grid, AxialGrid(0.0, 4.0, 200), {}, {}, 1e-4},
          v(tab, grid.n(), RealVector(grid.n() * tab.n_samples())) {
        const PotentialSamples v0 = poschl_teller(1.0, -1.0, grid);
        PotentialSamples vl = poschl_teller(1.5, 1.5, grid);
        prob.phi0 = ground_state(v0, grid).phi;
        prob.phi_d = ground_state(vl, grid).phi;
        v = tabulate(SeparableTimeline(v0, vl, Control::ramp(tab, 1.0, 0.0), Control::ramp(tab, 0.0, 1.0)));
    }
};

// Smooth bump supported strictly inside the (x, z) rectangle.
RealVector bump(const Grid1D& g, const AxialGrid& ax, double xc, double zc, double rx, double rz) {
    RealVector w(g.n() * ax.n_samples(), 0.0);
    for (std::size_t k = 0; k < ax.n_samples(); ++k) {
        for (std::size_t j = 0; j < g.n(); ++j) {
            const double a = (g.x(j) - xc) / rx;
            const double b = (ax.z(k) - zc) / rz;
            const double r2 = a * a + b * b;
            if (r2 < 1.0) w[k * g.n() + j] = std::exp(-1.0 / (1.0 - r2));
        }
    }
    return w;
}
}  // namespace

TEST(L2ControlGradient, ZeroCostateLinearControl) {
    const Grid1D g(-10.0, 10.0, 32);
    const AxialGrid ax(0.0, 7.0, 100);
    const Trajectory z = zero_trajectory(g, ax);
    const RealVector grad = l2_control_gradient(z, z, poschl_teller(1.0, 0.0, g), Control::ramp(ax, 1.0, 0.0), 0.3);
    for (double v : grad) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(L2ControlGradient, ZeroCostateSine) {
    const Grid1D g(-10.0, 10.0, 32);
    const double l = 7.0, gamma = 0.3;
    const AxialGrid ax(0.0, l, 2000);
    RealVector s(ax.n_samples());
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = std::sin(kPi * ax.z(k) / l);
    s.back() = 0.0;
    const Trajectory z = zero_trajectory(g, ax);
    const RealVector grad = l2_control_gradient(z, z, poschl_teller(1.0, 0.0, g), Control(ax, s), gamma);
    const double c = gamma * (kPi / l) * (kPi / l);
    for (std::size_t k = 1; k + 1 < s.size(); ++k) EXPECT_NEAR(grad[k], c * s[k], 1e-6 * c);
    EXPECT_EQ(grad.front(), 0.0);
    EXPECT_EQ(grad.back(), 0.0);
}

TEST(L2ControlGradient, AxialMismatchRejected) {
    const Grid1D g(-10.0, 10.0, 32);
    const Trajectory z = zero_trajectory(g, AxialGrid(0.0, 1.0, 10));
    EXPECT_THROW(l2_control_gradient(z, z, poschl_teller(1.0, 0.0, g), Control::ramp(AxialGrid(0.0, 1.0, 20), 1.0, 0.0), 1.0),
                 ContractError);
}

TEST(L2ControlGradient, StoredAndSweptAgree) {
    const ControlProblem& prob = small_tophat();
    const Control u = Control::ramp(prob.axial, 1.0, 0.0);
    const Control v = Control::ramp(prob.axial, 0.0, 1.0);
    const SeparableTimeline tl = prob.timeline(u, v);
    const Trajectory psi = propagate_forward_trajectory(prob.phi0, prob.grid, tl, prob.axial);
    const Field pl = costate_terminal(prob.phi_d, psi.snapshot(psi.n_snapshots() - 1), prob.grid);
    const Trajectory p = propagate_backward_trajectory(pl, prob.grid, tl, prob.axial);
    const RealVector gu = l2_control_gradient(psi, p, prob.v0, u, prob.gamma);
    const ControlGradient swept = control_gradient(prob, u, v, psi.snapshot(psi.n_snapshots() - 1));
    double scale = 0.0;
    for (double x : gu) scale = std::max(scale, std::abs(x));
    for (std::size_t k = 0; k < gu.size(); ++k) EXPECT_NEAR(swept.gu[k], gu[k], 1e-9 * scale);
}

TEST(L2ControlGradient, MatchesFiniteDifferencesOnTophat) {
    const ControlProblem& prob = full_tophat();
    const AxialGrid& ax = prob.axial;
    const Control u = Control::ramp(ax, 1.0, 0.0);
    const Control v = Control::ramp(ax, 0.0, 1.0);
    const ObjectiveValue base = evaluate_objective(prob, u, v);
    const ControlGradient g = control_gradient(prob, u, v, base.terminal);
    const double eps = 1e-5;
    for (std::uint64_t d = 0; d < 5; ++d) {
        const RealVector wu = evaluate_ansatz(sample_random_coefficients(100 + d, 15, 0.0, 0.0, ax.z0(), ax.z1()), ax).samples();
        const RealVector wv = evaluate_ansatz(sample_random_coefficients(200 + d, 15, 0.0, 0.0, ax.z0(), ax.z1()), ax).samples();
        const double adjoint = detail::trapezoid(g.gu, wu, ax.dz()) + detail::trapezoid(g.gv, wv, ax.dz());
        const double jp = reduced_objective(prob, detail::step_control(u, wu, -eps), detail::step_control(v, wv, -eps));
        const double jm = reduced_objective(prob, detail::step_control(u, wu, eps), detail::step_control(v, wv, eps));
        const double fd = (jp - jm) / (2.0 * eps);
        EXPECT_LT(std::abs(adjoint - fd), 1e-3 * std::abs(fd)) << "direction " << d;
    }
}

TEST(ProjectH10, SineMode) {
    const double l = 7.0;
    const AxialGrid ax(0.0, l, 2000);
    const ChebOperator op(0.0, l, 64);
    RealVector g(ax.n_samples());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = std::sin(kPi * ax.z(k) / l);
    const RealVector w = project_h10(g, ax, op);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(w[k], (l / kPi) * (l / kPi) * g[k], 1e-6);
}

TEST(ProjectH10, ConstantGivesParabola) {
    const double l = 3.0;
    const AxialGrid ax(0.0, l, 300);
    const ChebOperator op(0.0, l, 64);
    const RealVector w = project_h10(RealVector(ax.n_samples(), 1.0), ax, op);
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double z = ax.z(k);
        EXPECT_NEAR(w[k], 0.5 * z * (l - z), 1e-10);
    }
}

TEST(ProjectH10, EndpointsExactlyZero) {
    const AxialGrid ax(2.0, 9.0, 700);
    const ChebOperator op(2.0, 9.0, 64);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    RealVector g(ax.n_samples());
    for (auto& x : g) x = nd(rng);
    const RealVector w = project_h10(g, ax, op);
    EXPECT_EQ(w.front(), 0.0);
    EXPECT_EQ(w.back(), 0.0);
}

TEST(ProjectH10, WeakFormIdentity) {
    const ControlProblem& prob = small_tophat();
    const AxialGrid& ax = prob.axial;
    const Control u = Control::ramp(ax, 1.0, 0.0);
    const Control v = Control::ramp(ax, 0.0, 1.0);
    const ObjectiveValue base = evaluate_objective(prob, u, v);
    const ControlGradient g = control_gradient(prob, u, v, base.terminal);
    const ChebOperator op(ax.z0(), ax.z1(), 64);
    const RealVector gc = interpolate_uniform_to_cheb(g.gu, ax, op);
    const RealVector w = solve_dirichlet_poisson_1d(gc, op);
    for (int m : {1, 3, 6}) {
        RealVector test(op.n_nodes());
        for (std::size_t j = 0; j < test.size(); ++j)
            test[j] = std::sin(m * kPi * (op.nodes()[j] - ax.z0()) / ax.length());
        const double l2 = l2_pairing_cheb(gc, test, op);
        const double h1 = h10_pairing_cheb(w, test, op);
        EXPECT_NEAR(h1, l2, 1e-6 * std::max(1.0, std::abs(l2))) << m;
    }
}

TEST(Grape1D, ZeroIterationsBelowTolerance) {
    const ControlProblem& prob = small_tophat();
    const Control u = Control::ramp(prob.axial, 1.0, 0.0);
    const Control v = Control::ramp(prob.axial, 0.0, 1.0);
    GrapeConfig cfg;
    cfg.grad_tol = 1e6;
    const ControlDescentResult r = grape_descend_1d(prob, u, v, cfg);
    EXPECT_EQ(r.history.accepted_steps, 0u);
    EXPECT_EQ(r.history.stop_reason, "grad_tol");
    EXPECT_EQ(r.u.samples(), u.samples());
    EXPECT_EQ(r.v.samples(), v.samples());
}

TEST(Grape1D, ArmijoDecreaseAndAdmissibility) {
    const ControlProblem& prob = small_tophat();
    const Control u = Control::ramp(prob.axial, 1.0, 0.0);
    const Control v = Control::ramp(prob.axial, 0.0, 1.0);
    GrapeConfig cfg;
    cfg.max_iters = 12;
    const ControlDescentResult r = grape_descend_1d(prob, u, v, cfg);
    const auto& h = r.history;
    ASSERT_GT(h.accepted_steps, 0u);
    ASSERT_EQ(h.objective_per_iter.size(), h.accepted_steps + 1);
    for (std::size_t i = 1; i < h.objective_per_iter.size(); ++i) {
        EXPECT_LT(h.objective_per_iter[i], h.objective_per_iter[i - 1]);
        EXPECT_LE(h.objective_per_iter[i], h.objective_per_iter[i - 1] - h.armijo_margin[i - 1]);
    }
    EXPECT_EQ(r.u.samples().front(), 1.0);
    EXPECT_EQ(r.u.samples().back(), 0.0);
    EXPECT_EQ(r.v.samples().front(), 0.0);
    EXPECT_EQ(r.v.samples().back(), 1.0);
    EXPECT_NEAR(reduced_objective(prob, r.u, r.v), h.objective_per_iter.back(), 1e-15);
}

TEST(Grape1D, ImprovesOnDifferentialEvolution) {
    const ControlProblem& prob = small_tophat();
    DEConfig de;
    de.population = 12;
    de.generations = 6;
    const ControlDEResult d = de_over_controls(prob, de);
    const Control u = evaluate_ansatz(d.u, prob.axial);
    const Control v = evaluate_ansatz(d.v, prob.axial);
    const double de_infidelity = evaluate_objective(prob, u, v).infidelity;
    GrapeConfig cfg;
    cfg.max_iters = 10;
    const ControlDescentResult r = grape_descend_1d(prob, u, v, cfg);
    EXPECT_LT(r.history.infidelity_per_iter.back(), de_infidelity);
}

TEST(Poisson2D, ManufacturedSolution) {
    const std::size_t m = 256;
    const double h = 1.0 / static_cast<double>(m + 1);
    RealVector rhs(m * m), exact(m * m);
    for (std::size_t q = 0; q < m; ++q) {
        for (std::size_t p = 0; p < m; ++p) {
            const double x = static_cast<double>(p + 1) * h;
            const double z = static_cast<double>(q + 1) * h;
            exact[q * m + p] = std::sin(kPi * x) * std::sin(kPi * z);
            rhs[q * m + p] = 2.0 * kPi * kPi * exact[q * m + p];
        }
    }
    const RealVector w = solve_dirichlet_poisson_2d(rhs, m, m, h, h);
    double err = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) err = std::max(err, std::abs(w[i] - exact[i]));
    EXPECT_LT(err, 1e-4);
}

TEST(Poisson2D, InvertsDiscreteOperator) {
    const std::size_t rows = 37, cols = 53;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    RealVector w(rows * cols);
    for (auto& x : w) x = nd(rng);
    const RealVector rhs = apply_negative_laplacian_2d(w, rows, cols, 0.3, 0.07);
    const RealVector back = solve_dirichlet_poisson_2d(rhs, rows, cols, 0.3, 0.07);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(back[i], w[i], 1e-10);
}

TEST(PotentialGradient2D, HarmonicPotentialZeroCostate) {
    const Grid1D g(-3.0, 3.0, 64);
    const AxialGrid ax(0.0, 2.0, 40);
    RealVector values(g.n() * ax.n_samples());
    for (std::size_t k = 0; k < ax.n_samples(); ++k)
        for (std::size_t j = 0; j < g.n(); ++j) values[k * g.n() + j] = g.x(j) * g.x(j) - ax.z(k) * ax.z(k) + 0.5 * g.x(j) * ax.z(k);
    const TabulatedTimeline v(ax, g.n(), values);
    const Trajectory z = zero_trajectory(g, ax);
    const RealVector grad = potential_gradient_2d(z, z, v, g, 0.7);
    for (std::size_t k = 1; k + 1 < ax.n_samples(); ++k)
        for (std::size_t j = 1; j + 1 < g.n(); ++j) EXPECT_NEAR(grad[k * g.n() + j], 0.0, 1e-9);
}

TEST(PotentialGradient2D, SineZeroCostate) {
    const double lx = 8.0, gamma = 0.2;
    const Grid1D g(-4.0, 4.0, 256);
    const AxialGrid ax(0.0, 1.0, 10);
    RealVector values(g.n() * ax.n_samples());
    for (std::size_t k = 0; k < ax.n_samples(); ++k)
        for (std::size_t j = 0; j < g.n(); ++j) values[k * g.n() + j] = std::sin(2.0 * kPi * g.x(j) / lx);
    const TabulatedTimeline v(ax, g.n(), values);
    const Trajectory z = zero_trajectory(g, ax);
    const RealVector grad = potential_gradient_2d(z, z, v, g, gamma);
    const double c = gamma * std::pow(2.0 * kPi / lx, 2);
    for (std::size_t k = 0; k < ax.n_samples(); ++k)
        for (std::size_t j = 0; j < g.n(); ++j) EXPECT_NEAR(grad[k * g.n() + j], c * values[k * g.n() + j], 1e-4 * c);
}

TEST(PotentialGradient2D, GridMismatchRejected) {
    const Grid1D g(-3.0, 3.0, 64);
    const AxialGrid ax(0.0, 2.0, 10);
    const TabulatedTimeline v(ax, g.n(), RealVector(g.n() * 11));
    const Trajectory z = zero_trajectory(g, AxialGrid(0.0, 2.0, 20));
    EXPECT_THROW(potential_gradient_2d(z, z, v, g, 1.0), ContractError);
}

TEST(PotentialGradient2D, StreamingMatchesStored) {
    const Small2D s;
    const PotentialProblem prob{s.grid, s.tab, s.prob.phi0, s.prob.phi_d, s.prob.gamma};
    const Trajectory psi = propagate_forward_trajectory(prob.phi0, prob.grid, s.v, prob.axial);
    const Field pl = costate_terminal(prob.phi_d, psi.snapshot(psi.n_snapshots() - 1), prob.grid);
    const Trajectory p = propagate_backward_trajectory(pl, prob.grid, s.v, prob.axial);
    const RealVector stored = potential_gradient_2d(psi, p, s.v, prob.grid, prob.gamma);
    const RealVector streamed = potential_gradient_2d(prob, s.v, psi.snapshot(psi.n_snapshots() - 1));
    double scale = 0.0;
    for (double x : stored) scale = std::max(scale, std::abs(x));
    for (std::size_t i = 0; i < stored.size(); ++i) EXPECT_NEAR(streamed[i], stored[i], 1e-9 * scale);
}

TEST(PotentialGradient2D, MatchesFiniteDifferences) {
    const Small2D s;
    const ObjectiveValue base = evaluate_objective(s.prob, s.v);
    const RealVector g = potential_gradient_2d(s.prob, s.v, base.terminal);
    const double cell = s.grid.dx() * s.tab.dz();
    const std::vector<RealVector> dirs = {
        bump(s.grid, s.tab, 0.0, 2.0, 3.0, 1.5),
        bump(s.grid, s.tab, -1.0, 1.0, 2.0, 0.8),
        bump(s.grid, s.tab, 1.5, 2.8, 4.0, 1.0),
    };
    const double eps = 1e-4;
    for (std::size_t d = 0; d < dirs.size(); ++d) {
        double adjoint = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) adjoint += g[i] * dirs[d][i];
        adjoint *= cell;
        TabulatedTimeline plus = s.v, minus = s.v;
        for (std::size_t i = 0; i < g.size(); ++i) {
            plus.values[i] += eps * dirs[d][i];
            minus.values[i] -= eps * dirs[d][i];
        }
        const double fd = (reduced_objective(s.prob, plus) - reduced_objective(s.prob, minus)) / (2.0 * eps);
        EXPECT_GT(std::abs(fd), 1e-6);
        EXPECT_LT(std::abs(adjoint - fd), 1e-2 * std::abs(fd)) << "direction " << d;
    }
}

TEST(Grape2D, BoundarySlicesFixedAndDescent) {
    const Small2D s;
    GrapeConfig cfg;
    cfg.max_iters = 6;
    const PotentialDescentResult r = grape_descend_2d(s.prob, s.v, cfg);
    const auto& h = r.history;
    ASSERT_GT(h.accepted_steps, 0u);
    for (std::size_t i = 1; i < h.objective_per_iter.size(); ++i)
        EXPECT_LE(h.objective_per_iter[i], h.objective_per_iter[i - 1] - h.armijo_margin[i - 1]);
    const std::size_t last = s.tab.n_steps();
    for (std::size_t j = 0; j < s.grid.n(); ++j) {
        EXPECT_EQ(r.v.at(j, 0), s.v.at(j, 0));
        EXPECT_EQ(r.v.at(j, last), s.v.at(j, last));
    }
}
