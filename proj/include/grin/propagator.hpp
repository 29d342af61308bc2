#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "grin/errors.hpp"
#include "grin/fft.hpp"
#include "grin/potentials.hpp"
#include "grin/spectral.hpp"

namespace grin {

/**
 * Snapshots of psi (or p) on a Grid1D at every `stride`-th sample of the
 * propagation grid, stored slice-contiguous.
 */
struct Trajectory {
    Grid1D grid;
    AxialGrid axial;  // the propagation grid
    std::size_t stride = 1;
    std::vector<cplx> data;

    std::size_t n_snapshots() const { return axial.n_steps() / stride + 1; }
    double z(std::size_t s) const { return axial.z(s * stride); }
    std::span<const cplx> snapshot(std::size_t s) const {
        return {data.data() + s * grid.n(), grid.n()};
    }
    std::span<cplx> snapshot(std::size_t s) { return {data.data() + s * grid.n(), grid.n()}; }
};

/**
 * One Strang step, potential-kinetic-potential, with the potential frozen at
 * the step midpoint: psi <- e^{-iV dz/2} F^-1 e^{-i k^2 dz/2} F e^{-iV dz/2} psi.
 * The backward step applies the exact inverse.
 */
class SplitStepper {
public:
    SplitStepper(const Grid1D& grid, double dz)
        : grid_(grid), dz_(dz), ws_(grid.n()), kinetic_(grid.n()), phase_(grid.n()),
          potential_(grid.n()) {
        const double inv_n = 1.0 / static_cast<double>(grid.n());
        for (std::size_t j = 0; j < grid.n(); ++j) {
            const double k = grid.wavenumber(j);
            kinetic_[j] = std::polar(inv_n, -0.5 * k * k * dz);
        }
    }

    const Grid1D& grid() const { return grid_; }
    double dz() const { return dz_; }
    std::span<double> potential_buffer() { return potential_; }

    // Recomputes the half-step phase from potential_buffer().
    void load_potential() {
        const double h = 0.5 * dz_;
        for (std::size_t j = 0; j < phase_.size(); ++j) phase_[j] = std::polar(1.0, -potential_[j] * h);
    }

    // Returns false if the result is not finite.
    bool forward(std::span<cplx> psi) { return apply(psi, false); }
    bool backward(std::span<cplx> psi) { return apply(psi, true); }

private:
    bool apply(std::span<cplx> psi, bool inverse) {
        auto buf = ws_.data();
        const std::size_t n = psi.size();
        if (!inverse) {
            for (std::size_t j = 0; j < n; ++j) buf[j] = psi[j] * phase_[j];
            ws_.forward();
            for (std::size_t j = 0; j < n; ++j) buf[j] *= kinetic_[j];
        } else {
            for (std::size_t j = 0; j < n; ++j) buf[j] = psi[j] * std::conj(phase_[j]);
            ws_.forward();
            for (std::size_t j = 0; j < n; ++j) buf[j] *= std::conj(kinetic_[j]);
        }
        ws_.backward();
        double check = 0.0;
        if (!inverse) {
            for (std::size_t j = 0; j < n; ++j) {
                psi[j] = buf[j] * phase_[j];
                check += psi[j].real() + psi[j].imag();
            }
        } else {
            for (std::size_t j = 0; j < n; ++j) {
                psi[j] = buf[j] * std::conj(phase_[j]);
                check += psi[j].real() + psi[j].imag();
            }
        }
        return std::isfinite(check);
    }

    Grid1D grid_;
    double dz_;
    FourierWorkspace ws_;
    std::vector<cplx> kinetic_;
    std::vector<cplx> phase_;
    RealVector potential_;
};

namespace detail {

template <typename TL>
void check_propagation_inputs(std::span<const cplx> psi, const Grid1D& grid, const TL& timeline,
                              const AxialGrid& axial) {
    require(psi.size() == grid.n(), "propagate: field does not match grid");
    require(timeline_nx(timeline) == grid.n(), "propagate: timeline does not match grid");
    const AxialGrid& tax = timeline_axial(timeline);
    const double tol = 1e-12 * std::max(1.0, std::abs(axial.z0()) + std::abs(axial.z1()));
    require(tax.z0() <= axial.z0() + tol && tax.z1() >= axial.z1() - tol,
            "propagate: timeline does not cover the propagation interval");
    double nrm = 0.0;
    for (const auto& v : psi) nrm += std::norm(v);
    require(nrm > 0.0 && std::isfinite(nrm), "propagate: initial field must be nonzero and finite");
}

inline double midpoint(const AxialGrid& axial, std::size_t k) {
    return axial.z0() + (static_cast<double>(k) + 0.5) * axial.dz();
}

}  // namespace detail

// Forward integration from axial.z0 to axial.z1; returns the terminal field.
template <typename TL>
Field propagate_forward(std::span<const cplx> psi0, const Grid1D& grid,
                               const TL& timeline, const AxialGrid& axial) {
    detail::check_propagation_inputs(psi0, grid, timeline, axial);
    SplitStepper stepper(grid, axial.dz());
    Field psi(psi0.begin(), psi0.end());
    for (std::size_t k = 0; k < axial.n_steps(); ++k) {
        assemble_slice_into(timeline, detail::midpoint(axial, k), stepper.potential_buffer());
        stepper.load_potential();
        if (!stepper.forward(psi)) throw PropagationError("propagate_forward: non-finite field", k + 1);
    }
    return psi;
}

template <typename TL>
Trajectory propagate_forward_trajectory(std::span<const cplx> psi0, const Grid1D& grid,
                                               const TL& timeline, const AxialGrid& axial,
                                               std::size_t stride = 1) {
    detail::check_propagation_inputs(psi0, grid, timeline, axial);
    require(stride >= 1 && axial.n_steps() % stride == 0,
            "propagate: snapshot stride must divide the step count");
    Trajectory traj{grid, axial, stride, {}};
    traj.data.resize(traj.n_snapshots() * grid.n());
    SplitStepper stepper(grid, axial.dz());
    Field psi(psi0.begin(), psi0.end());
    std::copy(psi.begin(), psi.end(), traj.snapshot(0).begin());
    for (std::size_t k = 0; k < axial.n_steps(); ++k) {
        assemble_slice_into(timeline, detail::midpoint(axial, k), stepper.potential_buffer());
        stepper.load_potential();
        if (!stepper.forward(psi)) throw PropagationError("propagate_forward: non-finite field", k + 1);
        if ((k + 1) % stride == 0)
            std::copy(psi.begin(), psi.end(), traj.snapshot((k + 1) / stride).begin());
    }
    return traj;
}

// Integrates from axial.z1 down to axial.z0 with the same midpoint rule.
template <typename TL>
Field propagate_backward(std::span<const cplx> p_terminal, const Grid1D& grid,
                                const TL& timeline, const AxialGrid& axial) {
    detail::check_propagation_inputs(p_terminal, grid, timeline, axial);
    SplitStepper stepper(grid, axial.dz());
    Field p(p_terminal.begin(), p_terminal.end());
    for (std::size_t k = axial.n_steps(); k-- > 0;) {
        assemble_slice_into(timeline, detail::midpoint(axial, k), stepper.potential_buffer());
        stepper.load_potential();
        if (!stepper.backward(p)) throw PropagationError("propagate_backward: non-finite field", k);
    }
    return p;
}

template <typename TL>
Trajectory propagate_backward_trajectory(std::span<const cplx> p_terminal,
                                                const Grid1D& grid, const TL& timeline,
                                                const AxialGrid& axial, std::size_t stride = 1) {
    detail::check_propagation_inputs(p_terminal, grid, timeline, axial);
    require(stride >= 1 && axial.n_steps() % stride == 0,
            "propagate: snapshot stride must divide the step count");
    Trajectory traj{grid, axial, stride, {}};
    traj.data.resize(traj.n_snapshots() * grid.n());
    SplitStepper stepper(grid, axial.dz());
    Field p(p_terminal.begin(), p_terminal.end());
    std::copy(p.begin(), p.end(), traj.snapshot(traj.n_snapshots() - 1).begin());
    for (std::size_t k = axial.n_steps(); k-- > 0;) {
        assemble_slice_into(timeline, detail::midpoint(axial, k), stepper.potential_buffer());
        stepper.load_potential();
        if (!stepper.backward(p)) throw PropagationError("propagate_backward: non-finite field", k);
        if (k % stride == 0) std::copy(p.begin(), p.end(), traj.snapshot(k / stride).begin());
    }
    return traj;
}

// p(l) = -i <phi_d, psi(l)> phi_d, i.e. i p(l) = <phi_d, psi(l)> phi_d.
inline Field costate_terminal(std::span<const cplx> phi_d, std::span<const cplx> psi_l,
                              const Grid1D& grid) {
    const cplx overlap = inner_product(phi_d, psi_l, grid);
    const cplx coeff = cplx{0.0, -1.0} * overlap;
    Field p(phi_d.size());
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = coeff * phi_d[j];
    return p;
}

/**
 * Steps psi and p backward together from z1 to z0, calling
 * visit(k, psi_k, p_k) at every sample k = n_steps..0. Reconstructing psi by
 * the exact inverse steps avoids storing the forward trajectory.
 */
template <typename TL, typename Visitor>
void adjoint_sweep(std::span<const cplx> psi_terminal, std::span<const cplx> p_terminal,
                   const Grid1D& grid, const TL& timeline, const AxialGrid& axial,
                   Visitor&& visit) {
    detail::check_propagation_inputs(psi_terminal, grid, timeline, axial);
    require(p_terminal.size() == grid.n(), "adjoint_sweep: costate does not match grid");
    SplitStepper psi_stepper(grid, axial.dz());
    SplitStepper p_stepper(grid, axial.dz());
    Field psi(psi_terminal.begin(), psi_terminal.end());
    Field p(p_terminal.begin(), p_terminal.end());
    visit(axial.n_steps(), std::span<const cplx>(psi), std::span<const cplx>(p));
    for (std::size_t k = axial.n_steps(); k-- > 0;) {
        assemble_slice_into(timeline, detail::midpoint(axial, k), psi_stepper.potential_buffer());
        psi_stepper.load_potential();
        if (!psi_stepper.backward(psi)) throw PropagationError("adjoint_sweep: non-finite state", k);
        auto pb = psi_stepper.potential_buffer();
        std::copy(pb.begin(), pb.end(), p_stepper.potential_buffer().begin());
        p_stepper.load_potential();
        if (!p_stepper.backward(p)) throw PropagationError("adjoint_sweep: non-finite costate", k);
        visit(k, std::span<const cplx>(psi), std::span<const cplx>(p));
    }
}

/**
 * Self-convergence ratio |psi_h - psi_{h/2}| / |psi_{h/2} - psi_{h/4}| of the
 * terminal field; approaches 4 for a second-order integrator.
 */
template <typename TL>
double convergence_ratio(std::span<const cplx> psi0, const Grid1D& grid,
                                const TL& timeline, const AxialGrid& axial) {
    const AxialGrid half(axial.z0(), axial.z1(), axial.n_steps() * 2);
    const AxialGrid quarter(axial.z0(), axial.z1(), axial.n_steps() * 4);
    const Field a = propagate_forward(psi0, grid, timeline, axial);
    const Field b = propagate_forward(psi0, grid, timeline, half);
    const Field c = propagate_forward(psi0, grid, timeline, quarter);
    double e1 = 0.0;
    double e2 = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        e1 += std::norm(a[j] - b[j]);
        e2 += std::norm(b[j] - c[j]);
    }
    return std::sqrt(e1 / e2);
}

}  // namespace grin
