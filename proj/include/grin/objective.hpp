#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <utility>

#include "grin/controls.hpp"
#include "grin/errors.hpp"
#include "grin/potentials.hpp"
#include "grin/propagator.hpp"
#include "grin/spectral.hpp"

namespace grin {

enum class ObjectiveMode { controls_1d, potential_2d };

struct ObjectiveConfig {
    double gamma = 1e-6;
    Field phi_d;
    ObjectiveMode mode = ObjectiveMode::controls_1d;
};

// 1/2 (|phi_d|^4 - |<phi_d, psi_l>|^2)
inline double infidelity(std::span<const cplx> psi_l, std::span<const cplx> phi_d, const Grid1D& grid) {
    require(psi_l.size() == phi_d.size(), "infidelity: field size mismatch");
    const double nd = norm_squared(phi_d, grid);
    return 0.5 * (nd * nd - std::norm(inner_product(phi_d, psi_l, grid)));
}

// (gamma/2) sum ((u_{k+1} - u_k)/dz)^2 dz
inline double tikhonov_cost_1d(const Control& u, double gamma) {
    const auto& s = u.samples();
    const double dz = u.axial().dz();
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        const double d = s[k + 1] - s[k];
        acc += d * d;
    }
    return 0.5 * gamma * acc / dz;
}

/**
 * (gamma/2) * integral of |dV/dx|^2 + |dV/dz|^2 over the tabulated grid.
 * x-differences wrap periodically; the x-term uses trapezoid weights in z.
 */
inline double tikhonov_cost_2d(const TabulatedTimeline& v, const Grid1D& grid, double gamma) {
    require(v.n_x == grid.n(), "tikhonov_cost_2d: timeline does not match grid");
    const std::size_t nx = v.n_x;
    const std::size_t nz = v.axial.n_samples();
    const double dx = grid.dx();
    const double dz = v.axial.dz();
    double ax = 0.0;
    double az = 0.0;
    for (std::size_t k = 0; k < nz; ++k) {
        const auto s = v.slice(k);
        double row = 0.0;
        for (std::size_t j = 0; j < nx; ++j) {
            const double d = s[(j + 1) % nx] - s[j];
            row += d * d;
        }
        ax += (k == 0 || k + 1 == nz) ? 0.5 * row : row;
        if (k + 1 < nz) {
            const auto t = v.slice(k + 1);
            for (std::size_t j = 0; j < nx; ++j) {
                const double d = t[j] - s[j];
                az += d * d;
            }
        }
    }
    return 0.5 * gamma * (ax * dz / dx + az * dx / dz);
}

struct ObjectiveValue {
    double total = 0.0;
    double infidelity = 0.0;
    double tikhonov = 0.0;
    Field terminal;
};

/**
 * One stage of the separable problem: propagate phi0 under
 * u(z) v0 + v(z) vl on `axial` and compare with phi_d.
 */
struct ControlProblem {
    Grid1D grid;
    AxialGrid axial;
    PotentialSamples v0;
    PotentialSamples vl;
    Field phi0;
    Field phi_d;
    double gamma = 1e-6;

    SeparableTimeline timeline(const Control& u, const Control& v) const {
        return SeparableTimeline(v0, vl, u, v);
    }
};

inline ObjectiveValue evaluate_objective(const ControlProblem& prob, const Control& u, const Control& v) {
    require(u.axial() == prob.axial && v.axial() == prob.axial,
            "reduced_objective: controls are not on the problem grid");
    ObjectiveValue out;
    out.terminal = propagate_forward(prob.phi0, prob.grid, prob.timeline(u, v), prob.axial);
    out.infidelity = infidelity(out.terminal, prob.phi_d, prob.grid);
    out.tikhonov = tikhonov_cost_1d(u, prob.gamma) + tikhonov_cost_1d(v, prob.gamma);
    out.total = out.infidelity + out.tikhonov;
    return out;
}

inline double reduced_objective(const ControlProblem& prob, const Control& u, const Control& v) {
    return evaluate_objective(prob, u, v).total;
}

/**
 * Full (x, z) refinement: propagate phi0 through a tabulated potential. The
 * propagation grid may be finer than the tabulation by an integer factor.
 */
struct PotentialProblem {
    Grid1D grid;
    AxialGrid axial;  // propagation grid
    Field phi0;
    Field phi_d;
    double gamma = 1e-8;
};

inline ObjectiveValue evaluate_objective(const PotentialProblem& prob, const TabulatedTimeline& v) {
    require(v.axial.z0() == prob.axial.z0() && v.axial.z1() == prob.axial.z1(),
            "reduced_objective: timeline interval does not match the problem");
    ObjectiveValue out;
    out.terminal = propagate_forward(prob.phi0, prob.grid, v, prob.axial);
    out.infidelity = infidelity(out.terminal, prob.phi_d, prob.grid);
    out.tikhonov = tikhonov_cost_2d(v, prob.grid, prob.gamma);
    out.total = out.infidelity + out.tikhonov;
    return out;
}

inline double reduced_objective(const PotentialProblem& prob, const TabulatedTimeline& v) {
    return evaluate_objective(prob, v).total;
}

}  // namespace grin
