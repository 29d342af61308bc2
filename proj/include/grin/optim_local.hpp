#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "grin/controls.hpp"
#include "grin/errors.hpp"
#include "grin/objective.hpp"
#include "grin/poisson2d.hpp"
#include "grin/potentials.hpp"
#include "grin/propagator.hpp"
#include "grin/spectral.hpp"

namespace grin {

struct GrapeConfig {
    std::size_t max_iters = 100;
    double grad_tol = 1e-8;
    double armijo_c = 1e-4;
    double backtrack_ratio = 0.5;
    double initial_step = 1.0;  // in units of 1/|g|_inf
    double min_step = 1e-12;
    std::size_t cheb_nodes = 64;

    void validate() const {
        require(grad_tol > 0.0, "GrapeConfig: grad_tol must be positive");
        require(armijo_c > 0.0 && armijo_c < 1.0, "GrapeConfig: armijo_c must lie in (0, 1)");
        require(backtrack_ratio > 0.0 && backtrack_ratio < 1.0,
                "GrapeConfig: backtrack_ratio must lie in (0, 1)");
        require(initial_step > 0.0 && min_step > 0.0 && min_step < initial_step,
                "GrapeConfig: need 0 < min_step < initial_step");
        require(cheb_nodes >= 8, "GrapeConfig: need at least 8 Chebyshev nodes");
    }
};

struct DescentHistory {
    // Entry 0 describes the starting point; entry i > 0 the i-th accepted step.
    std::vector<double> objective_per_iter;
    std::vector<double> infidelity_per_iter;
    std::vector<double> tikhonov_per_iter;
    // Projected-gradient norm at the start of each iteration.
    std::vector<double> grad_norm_per_iter;
    // Accepted step length and the Armijo margin c*alpha*|g|^2 it had to beat.
    std::vector<double> step_per_iter;
    std::vector<double> armijo_margin;
    std::size_t accepted_steps = 0;
    std::size_t evaluations = 0;
    bool stalled = false;
    std::string stop_reason;

    void record(const ObjectiveValue& v) {
        objective_per_iter.push_back(v.total);
        infidelity_per_iter.push_back(v.infidelity);
        tikhonov_per_iter.push_back(v.tikhonov);
    }
};

namespace detail {

inline double trapezoid(std::span<const double> a, std::span<const double> b, double h) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double w = (k == 0 || k + 1 == a.size()) ? 0.5 : 1.0;
        acc += w * a[k] * b[k];
    }
    return acc * h;
}

// Re sum conj(p) * basis * psi dx
inline double weighted_pairing(std::span<const cplx> p, std::span<const double> basis,
                               std::span<const cplx> psi, double dx) {
    double acc = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j)
        acc += basis[j] * (p[j].real() * psi[j].real() + p[j].imag() * psi[j].imag());
    return acc * dx;
}

// Adds -gamma * u'' (second difference) at interior samples, zeroes the ends.
inline void add_tikhonov_gradient(RealVector& g, const Control& u, double gamma) {
    const auto& s = u.samples();
    const double dz2 = u.axial().dz() * u.axial().dz();
    for (std::size_t k = 1; k + 1 < s.size(); ++k) g[k] -= gamma * (s[k + 1] - 2.0 * s[k] + s[k - 1]) / dz2;
    g.front() = 0.0;
    g.back() = 0.0;
}

}  // namespace detail

/**
 * L2 gradient of the reduced objective with respect to one control:
 * Re<p, dV/du psi> - gamma u'' at interior samples, zero at the ends. With
 * snapshot stride > 1 the pairing is interpolated linearly between snapshots.
 */
inline RealVector l2_control_gradient(const Trajectory& psi, const Trajectory& p,
                                      const PotentialSamples& basis, const Control& u, double gamma) {
    require(psi.axial == p.axial && psi.stride == p.stride, "l2_control_gradient: trajectory mismatch");
    require(psi.axial == u.axial(), "l2_control_gradient: control is not on the trajectory grid");
    require(basis.size() == psi.grid.n() && p.grid.n() == psi.grid.n(),
            "l2_control_gradient: basis does not match grid");
    const std::size_t ns = psi.n_snapshots();
    RealVector pairing(ns);
    for (std::size_t s = 0; s < ns; ++s)
        pairing[s] = detail::weighted_pairing(p.snapshot(s), basis.values, psi.snapshot(s), psi.grid.dx());
    RealVector g(u.axial().n_samples());
    for (std::size_t k = 0; k < g.size(); ++k) {
        const std::size_t s = k / psi.stride;
        const std::size_t r = k % psi.stride;
        if (r == 0) {
            g[k] = pairing[s];
        } else {
            const double t = static_cast<double>(r) / static_cast<double>(psi.stride);
            g[k] = (1.0 - t) * pairing[s] + t * pairing[s + 1];
        }
    }
    detail::add_tikhonov_gradient(g, u, gamma);
    return g;
}

struct ControlGradient {
    RealVector gu;
    RealVector gv;
};

/**
 * Both L2 control gradients from the terminal state of a forward run, via a
 * joint backward sweep of state and costate (no stored trajectory).
 */
inline ControlGradient control_gradient(const ControlProblem& prob, const Control& u, const Control& v,
                                        std::span<const cplx> terminal) {
    const SeparableTimeline tl = prob.timeline(u, v);
    const Field p_l = costate_terminal(prob.phi_d, terminal, prob.grid);
    ControlGradient g{RealVector(prob.axial.n_samples()), RealVector(prob.axial.n_samples())};
    const double dx = prob.grid.dx();
    adjoint_sweep(terminal, p_l, prob.grid, tl, prob.axial,
                  [&](std::size_t k, std::span<const cplx> psi, std::span<const cplx> p) {
                      g.gu[k] = detail::weighted_pairing(p, prob.v0.values, psi, dx);
                      g.gv[k] = detail::weighted_pairing(p, prob.vl.values, psi, dx);
                  });
    detail::add_tikhonov_gradient(g.gu, u, prob.gamma);
    detail::add_tikhonov_gradient(g.gv, v, prob.gamma);
    return g;
}

// Riesz representative in the homogeneous H^1_0 space: -w'' = g, w(z0) = w(z1) = 0.
inline RealVector project_h10(std::span<const double> l2_grad, const AxialGrid& axial, const ChebOperator& op) {
    const RealVector at_nodes = interpolate_uniform_to_cheb(l2_grad, axial, op);
    const RealVector w = solve_dirichlet_poisson_1d(at_nodes, op);
    RealVector out = interpolate_cheb_to_uniform(w, op, axial);
    out.front() = 0.0;
    out.back() = 0.0;
    return out;
}

// <a, b> in L2 using Clenshaw-Curtis weights on the collocation nodes.
inline double l2_pairing_cheb(std::span<const double> a, std::span<const double> b, const ChebOperator& op) {
    const auto& w = op.quadrature_weights();
    double acc = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * a[j] * b[j];
    return acc;
}

// <a', b'> in L2 on the collocation nodes.
inline double h10_pairing_cheb(std::span<const double> a, std::span<const double> b, const ChebOperator& op) {
    const auto n = static_cast<Eigen::Index>(op.n_nodes());
    const Eigen::VectorXd da = op.d1() * Eigen::Map<const Eigen::VectorXd>(a.data(), n);
    const Eigen::VectorXd db = op.d1() * Eigen::Map<const Eigen::VectorXd>(b.data(), n);
    return l2_pairing_cheb(std::span<const double>(da.data(), a.size()),
                           std::span<const double>(db.data(), b.size()), op);
}

struct ControlDescentResult {
    Control u;
    Control v;
    DescentHistory history;
    Field terminal;
};

namespace detail {

inline double sup_norm(std::span<const double> a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

inline Control step_control(const Control& u, std::span<const double> dir, double alpha) {
    RealVector s = u.samples();
    for (std::size_t k = 0; k < s.size(); ++k) s[k] -= alpha * dir[k];
    return Control(u.axial(), std::move(s), u.u0(), u.ul());
}

}  // namespace detail

/**
 * Projected gradient descent on (u, v) with one shared Armijo backtracking
 * search. The projected gradients vanish at the ends, so boundary values are
 * never modified.
 */
inline ControlDescentResult grape_descend_1d(const ControlProblem& prob, const Control& u_init,
                                             const Control& v_init, const GrapeConfig& cfg) {
    cfg.validate();
    const ChebOperator op(prob.axial.z0(), prob.axial.z1(), cfg.cheb_nodes);
    ControlDescentResult res{u_init, v_init, {}, {}};
    DescentHistory& h = res.history;

    ObjectiveValue cur = evaluate_objective(prob, res.u, res.v);
    ++h.evaluations;
    h.record(cur);
    double alpha_cap = 0.0;

    for (std::size_t it = 0;; ++it) {
        if (it >= cfg.max_iters) {
            h.stop_reason = "max_iters";
            break;
        }
        const ControlGradient g = control_gradient(prob, res.u, res.v, cur.terminal);
        const RealVector pu = project_h10(g.gu, prob.axial, op);
        const RealVector pv = project_h10(g.gv, prob.axial, op);
        const double dz = prob.axial.dz();
        const double gnorm2 = detail::trapezoid(g.gu, pu, dz) + detail::trapezoid(g.gv, pv, dz);
        const double gnorm = std::sqrt(std::max(gnorm2, 0.0));
        h.grad_norm_per_iter.push_back(gnorm);
        if (gnorm < cfg.grad_tol) {
            h.stop_reason = "grad_tol";
            break;
        }
        const double sup = std::max(detail::sup_norm(pu), detail::sup_norm(pv));
        double alpha = cfg.initial_step / sup;
        if (alpha_cap > 0.0) alpha = std::min(alpha, alpha_cap);

        bool accepted = false;
        bool first_trial = true;
        while (alpha >= cfg.min_step) {
            Control ut = detail::step_control(res.u, pu, alpha);
            Control vt = detail::step_control(res.v, pv, alpha);
            ObjectiveValue trial;
            bool finite = true;
            try {
                trial = evaluate_objective(prob, ut, vt);
                finite = std::isfinite(trial.total);
            } catch (const PropagationError&) {
                finite = false;
            }
            ++h.evaluations;
            const double margin = cfg.armijo_c * alpha * gnorm2;
            if (finite && trial.total <= cur.total - margin) {
                res.u = std::move(ut);
                res.v = std::move(vt);
                cur = std::move(trial);
                h.record(cur);
                h.step_per_iter.push_back(alpha);
                h.armijo_margin.push_back(margin);
                ++h.accepted_steps;
                alpha_cap = first_trial ? 2.0 * alpha : alpha;
                accepted = true;
                break;
            }
            alpha *= cfg.backtrack_ratio;
            first_trial = false;
        }
        if (!accepted) {
            h.stop_reason = "step_underflow";
            h.stalled = h.accepted_steps == 0;
            break;
        }
    }
    res.terminal = std::move(cur.terminal);
    return res;
}

namespace detail {

inline void add_laplacian_term(RealVector& g, const TabulatedTimeline& v, const Grid1D& grid, double gamma) {
    const std::size_t nx = v.n_x;
    const std::size_t nz = v.axial.n_samples();
    const double dx2 = grid.dx() * grid.dx();
    const double dz2 = v.axial.dz() * v.axial.dz();
    for (std::size_t k = 0; k < nz; ++k) {
        const auto s = v.slice(k);
        for (std::size_t j = 0; j < nx; ++j) {
            const double vxx = (s[(j + 1) % nx] - 2.0 * s[j] + s[(j + nx - 1) % nx]) / dx2;
            double vzz;
            if (nz < 4) {
                vzz = 0.0;
            } else if (k == 0) {
                vzz = (2.0 * v.at(j, 0) - 5.0 * v.at(j, 1) + 4.0 * v.at(j, 2) - v.at(j, 3)) / dz2;
            } else if (k + 1 == nz) {
                vzz = (2.0 * v.at(j, k) - 5.0 * v.at(j, k - 1) + 4.0 * v.at(j, k - 2) - v.at(j, k - 3)) / dz2;
            } else {
                vzz = (v.at(j, k + 1) - 2.0 * s[j] + v.at(j, k - 1)) / dz2;
            }
            g[k * nx + j] -= gamma * (vxx + vzz);
        }
    }
}

}  // namespace detail

/**
 * L2 gradient of the 2D reduced objective at the tabulated samples:
 * Re(conj(p) psi) - gamma * (5-point Laplacian of V). Trajectories must have
 * one snapshot per tabulated slice. x is periodic; the z-boundary rows use a
 * one-sided second difference.
 */
inline RealVector potential_gradient_2d(const Trajectory& psi, const Trajectory& p,
                                        const TabulatedTimeline& v, const Grid1D& grid, double gamma) {
    require(psi.axial == p.axial && psi.stride == p.stride, "potential_gradient_2d: trajectory mismatch");
    require(v.n_x == grid.n() && psi.grid.n() == grid.n() && p.grid.n() == grid.n(),
            "potential_gradient_2d: grid mismatch");
    require(psi.n_snapshots() == v.axial.n_samples(),
            "potential_gradient_2d: one snapshot per tabulated slice required");
    const double tol = 1e-9 * std::max(1.0, std::abs(v.axial.z1()));
    require(std::abs(psi.axial.z0() - v.axial.z0()) <= tol && std::abs(psi.axial.z1() - v.axial.z1()) <= tol,
            "potential_gradient_2d: grid mismatch");
    const std::size_t nx = grid.n();
    RealVector g(v.values.size());
    for (std::size_t k = 0; k < v.axial.n_samples(); ++k) {
        const auto a = psi.snapshot(k);
        const auto b = p.snapshot(k);
        for (std::size_t j = 0; j < nx; ++j)
            g[k * nx + j] = b[j].real() * a[j].real() + b[j].imag() * a[j].imag();
    }
    detail::add_laplacian_term(g, v, grid, gamma);
    return g;
}

/**
 * Streaming version for a propagation grid that refines the tabulation by an
 * integer factor: the pointwise pairing is integrated against the linear hat
 * functions of the tabulated slices, then divided by the slice spacing.
 */
inline RealVector potential_gradient_2d(const PotentialProblem& prob, const TabulatedTimeline& v,
                                        std::span<const cplx> terminal) {
    const std::size_t n_tab = v.axial.n_steps();
    require(prob.axial.n_steps() % n_tab == 0,
            "potential_gradient_2d: propagation steps must refine the tabulation");
    const std::size_t ratio = prob.axial.n_steps() / n_tab;
    const std::size_t nx = prob.grid.n();
    const double dz = prob.axial.dz();
    const Field p_l = costate_terminal(prob.phi_d, terminal, prob.grid);
    RealVector g(v.values.size(), 0.0);
    adjoint_sweep(terminal, p_l, prob.grid, v, prob.axial,
                  [&](std::size_t k, std::span<const cplx> psi, std::span<const cplx> p) {
                      const double w = (k == 0 || k == prob.axial.n_steps()) ? 0.5 * dz : dz;
                      const std::size_t kk = k / ratio;
                      const double t = static_cast<double>(k % ratio) / static_cast<double>(ratio);
                      double* lo = g.data() + kk * nx;
                      double* hi = t > 0.0 ? g.data() + (kk + 1) * nx : nullptr;
                      for (std::size_t j = 0; j < nx; ++j) {
                          const double r = w * (p[j].real() * psi[j].real() + p[j].imag() * psi[j].imag());
                          lo[j] += (1.0 - t) * r;
                          if (hi) hi[j] += t * r;
                      }
                  });
    const double dzt = v.axial.dz();
    for (std::size_t kk = 0; kk <= n_tab; ++kk) {
        const double width = (kk == 0 || kk == n_tab) ? 0.5 * dzt : dzt;
        for (std::size_t j = 0; j < nx; ++j) g[kk * nx + j] /= width;
    }
    detail::add_laplacian_term(g, v, prob.grid, prob.gamma);
    return g;
}

/**
 * Riesz representative of a 2D L2 gradient in H^1_0 of the (x, z) rectangle:
 * zero on the first and last slices and on the x = x_min column (which the
 * periodic grid also uses as x = x_max).
 */
inline RealVector project_h10_2d(std::span<const double> g, const TabulatedTimeline& v, const Grid1D& grid) {
    const std::size_t nx = grid.n();
    const std::size_t nz = v.axial.n_samples();
    require(g.size() == nx * nz, "project_h10_2d: size mismatch");
    require(nz >= 3, "project_h10_2d: need interior slices");
    const std::size_t rows = nz - 2;
    const std::size_t cols = nx - 1;
    RealVector rhs(rows * cols);
    for (std::size_t q = 0; q < rows; ++q)
        for (std::size_t c = 0; c < cols; ++c) rhs[q * cols + c] = g[(q + 1) * nx + c + 1];
    const RealVector w = solve_dirichlet_poisson_2d(rhs, rows, cols, grid.dx(), v.axial.dz());
    RealVector out(nx * nz, 0.0);
    for (std::size_t q = 0; q < rows; ++q)
        for (std::size_t c = 0; c < cols; ++c) out[(q + 1) * nx + c + 1] = w[q * cols + c];
    return out;
}

struct PotentialDescentResult {
    TabulatedTimeline v;
    DescentHistory history;
    Field terminal;
};

inline PotentialDescentResult grape_descend_2d(const PotentialProblem& prob, const TabulatedTimeline& v_init,
                                               const GrapeConfig& cfg) {
    cfg.validate();
    PotentialDescentResult res{v_init, {}, {}};
    DescentHistory& h = res.history;
    const double cell = prob.grid.dx() * v_init.axial.dz();

    ObjectiveValue cur = evaluate_objective(prob, res.v);
    ++h.evaluations;
    h.record(cur);
    double alpha_cap = 0.0;

    for (std::size_t it = 0;; ++it) {
        if (it >= cfg.max_iters) {
            h.stop_reason = "max_iters";
            break;
        }
        const RealVector g = potential_gradient_2d(prob, res.v, cur.terminal);
        const RealVector w = project_h10_2d(g, res.v, prob.grid);
        double gnorm2 = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) gnorm2 += g[i] * w[i];
        gnorm2 *= cell;
        const double gnorm = std::sqrt(std::max(gnorm2, 0.0));
        h.grad_norm_per_iter.push_back(gnorm);
        if (gnorm < cfg.grad_tol) {
            h.stop_reason = "grad_tol";
            break;
        }
        double alpha = cfg.initial_step / detail::sup_norm(w);
        if (alpha_cap > 0.0) alpha = std::min(alpha, alpha_cap);

        bool accepted = false;
        bool first_trial = true;
        while (alpha >= cfg.min_step) {
            TabulatedTimeline trial_v = res.v;
            for (std::size_t i = 0; i < w.size(); ++i) trial_v.values[i] -= alpha * w[i];
            ObjectiveValue trial;
            bool finite = true;
            try {
                trial = evaluate_objective(prob, trial_v);
                finite = std::isfinite(trial.total);
            } catch (const PropagationError&) {
                finite = false;
            }
            ++h.evaluations;
            const double margin = cfg.armijo_c * alpha * gnorm2;
            if (finite && trial.total <= cur.total - margin) {
                res.v = std::move(trial_v);
                cur = std::move(trial);
                h.record(cur);
                h.step_per_iter.push_back(alpha);
                h.armijo_margin.push_back(margin);
                ++h.accepted_steps;
                alpha_cap = first_trial ? 2.0 * alpha : alpha;
                accepted = true;
                break;
            }
            alpha *= cfg.backtrack_ratio;
            first_trial = false;
        }
        if (!accepted) {
            h.stop_reason = "step_underflow";
            h.stalled = h.accepted_steps == 0;
            break;
        }
    }
    res.terminal = std::move(cur.terminal);
    return res;
}

}  // namespace grin
