#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <variant>

#include "grin/controls.hpp"
#include "grin/errors.hpp"
#include "grin/spectral.hpp"

namespace grin {

// Real potential sampled on a Grid1D.
struct PotentialSamples {
    RealVector values;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t j) const { return values[j]; }
};

inline double sech(double x) {
    const double ax = std::abs(x);
    if (ax > 700.0) return 0.0;
    return 1.0 / std::cosh(ax);
}

// -sigma(sigma+1)/2 * sech^2(x - center)
inline PotentialSamples poschl_teller(double sigma, double center, const Grid1D& grid) {
    require(sigma > 0.0, "poschl_teller: sigma must be positive");
    const double depth = 0.5 * sigma * (sigma + 1.0);
    PotentialSamples v{RealVector(grid.n())};
    for (std::size_t j = 0; j < grid.n(); ++j) {
        const double s = sech(grid.x(j) - center);
        v.values[j] = -depth * s * s;
    }
    return v;
}

inline PotentialSamples harmonic(double omega, const Grid1D& grid) {
    PotentialSamples v{RealVector(grid.n())};
    for (std::size_t j = 0; j < grid.n(); ++j) {
        const double x = grid.x(j);
        v.values[j] = 0.5 * omega * omega * x * x;
    }
    return v;
}

// Normalized A exp(-a x^m); A > 0 is fixed by the unit L2 norm.
inline Field tophat_target(double a, int m, const Grid1D& grid) {
    require(a > 0.0, "tophat_target: a must be positive");
    require(m > 0 && m % 2 == 0, "tophat_target: m must be a positive even integer");
    Field f(grid.n());
    for (std::size_t j = 0; j < grid.n(); ++j) {
        const double e = a * std::pow(grid.x(j), m);
        f[j] = e > 700.0 ? 0.0 : std::exp(-e);
    }
    return normalized(std::move(f), grid);
}

/**
 * Three sigma = 1 wells at -a, 0, a and the sum of their ground states,
 * -(sech(x-a) + sech(x+a) + sech(x)) / sqrt(6), renormalized on the grid.
 * The field is only approximately an eigenfunction of the potential.
 */
inline std::pair<PotentialSamples, Field> beam_combine_initial(double a, const Grid1D& grid) {
    require(a > 0.0, "beam_combine_initial: spacing must be positive");
    PotentialSamples v{RealVector(grid.n())};
    Field phi(grid.n());
    const double amp = -1.0 / std::sqrt(6.0);
    for (std::size_t j = 0; j < grid.n(); ++j) {
        const double x = grid.x(j);
        const double sl = sech(x + a);
        const double sc = sech(x);
        const double sr = sech(x - a);
        v.values[j] = -(sl * sl + sc * sc + sr * sr);
        phi[j] = amp * (sl + sc + sr);
    }
    return {std::move(v), normalized(std::move(phi), grid)};
}

/**
 * V(x, z) = u(z) v0(x) + v(z) vl(x), with u running 1 -> 0 and v running
 * 0 -> 1 across the axial interval.
 */
struct SeparableTimeline {
    PotentialSamples v0;
    PotentialSamples vl;
    Control u;
    Control v;

    SeparableTimeline(PotentialSamples v0_, PotentialSamples vl_, Control u_, Control v_)
        : v0(std::move(v0_)), vl(std::move(vl_)), u(std::move(u_)), v(std::move(v_)) {
        require(v0.size() == vl.size(), "SeparableTimeline: potential size mismatch");
        require(u.axial() == v.axial(), "SeparableTimeline: controls on different grids");
        require(u.u0() == 1.0 && u.ul() == 0.0 && v.u0() == 0.0 && v.ul() == 1.0,
                "SeparableTimeline: controls must satisfy u(z0)=v(z1)=1, u(z1)=v(z0)=0");
    }

    const AxialGrid& axial() const { return u.axial(); }
    std::size_t n_x() const { return v0.size(); }
};

/**
 * Fully tabulated V(x, z): one x-slice per sample of its own axial grid,
 * stored slice-contiguous (values[k * n_x + j]).
 */
struct TabulatedTimeline {
    AxialGrid axial;
    std::size_t n_x;
    RealVector values;

    TabulatedTimeline(AxialGrid axial_, std::size_t n_x_, RealVector values_)
        : axial(axial_), n_x(n_x_), values(std::move(values_)) {
        require(values.size() == n_x * axial.n_samples(), "TabulatedTimeline: size mismatch");
    }

    std::span<const double> slice(std::size_t k) const { return {values.data() + k * n_x, n_x}; }
    std::span<double> slice(std::size_t k) { return {values.data() + k * n_x, n_x}; }
    double at(std::size_t j, std::size_t k) const { return values[k * n_x + j]; }
};

using Timeline = std::variant<SeparableTimeline, TabulatedTimeline>;

inline const AxialGrid& timeline_axial(const SeparableTimeline& t) { return t.axial(); }
inline const AxialGrid& timeline_axial(const TabulatedTimeline& t) { return t.axial; }
inline std::size_t timeline_nx(const SeparableTimeline& t) { return t.n_x(); }
inline std::size_t timeline_nx(const TabulatedTimeline& t) { return t.n_x; }

inline const AxialGrid& timeline_axial(const Timeline& t) {
    return std::visit(
        [](const auto& tl) -> const AxialGrid& { return timeline_axial(tl); },
        t);
}

inline std::size_t timeline_nx(const Timeline& t) {
    return std::visit(
        [](const auto& tl) -> std::size_t { return timeline_nx(tl); },
        t);
}

namespace detail {

// Index and weight for linear interpolation on an axial grid.
inline std::pair<std::size_t, double> locate(const AxialGrid& axial, double z) {
    const double tol = 1e-12 * std::max(1.0, std::abs(axial.z0()) + std::abs(axial.z1()));
    require(z >= axial.z0() - tol && z <= axial.z1() + tol, "assemble_slice: z out of range");
    const double s = std::clamp((z - axial.z0()) / axial.dz(), 0.0,
                                static_cast<double>(axial.n_steps()));
    auto k = static_cast<std::size_t>(s);
    if (k >= axial.n_steps()) return {axial.n_steps() - 1, 1.0};
    return {k, s - static_cast<double>(k)};
}

}  // namespace detail

inline void assemble_slice_into(const SeparableTimeline& tl, double z, std::span<double> out) {
    require(out.size() == tl.n_x(), "assemble_slice: output size mismatch");
    const double uz = tl.u.at(z);
    const double vz = tl.v.at(z);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = uz * tl.v0[j] + vz * tl.vl[j];
}

inline void assemble_slice_into(const TabulatedTimeline& tl, double z, std::span<double> out) {
    require(out.size() == tl.n_x, "assemble_slice: output size mismatch");
    const auto [k, t] = detail::locate(tl.axial, z);
    const auto a = tl.slice(k);
    const auto b = tl.slice(k + 1);
    if (t == 0.0) {
        std::copy(a.begin(), a.end(), out.begin());
    } else if (t == 1.0) {
        std::copy(b.begin(), b.end(), out.begin());
    } else {
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = (1.0 - t) * a[j] + t * b[j];
    }
}

inline void assemble_slice_into(const Timeline& tl, double z, std::span<double> out) {
    std::visit([&](const auto& t) { assemble_slice_into(t, z, out); }, tl);
}

inline PotentialSamples assemble_slice(const SeparableTimeline& timeline, double z) {
    PotentialSamples out{RealVector(timeline.n_x())};
    assemble_slice_into(timeline, z, out.values);
    return out;
}

inline PotentialSamples assemble_slice(const TabulatedTimeline& timeline, double z) {
    PotentialSamples out{RealVector(timeline.n_x)};
    assemble_slice_into(timeline, z, out.values);
    return out;
}

inline PotentialSamples assemble_slice(const Timeline& timeline, double z) {
    PotentialSamples out{RealVector(timeline_nx(timeline))};
    assemble_slice_into(timeline, z, out.values);
    return out;
}

// Samples a separable timeline on its own axial grid.
inline TabulatedTimeline tabulate(const SeparableTimeline& tl) {
    const AxialGrid& ax = tl.axial();
    RealVector values(tl.n_x() * ax.n_samples());
    for (std::size_t k = 0; k < ax.n_samples(); ++k) {
        const double uz = tl.u.samples()[k];
        const double vz = tl.v.samples()[k];
        for (std::size_t j = 0; j < tl.n_x(); ++j)
            values[k * tl.n_x() + j] = uz * tl.v0[j] + vz * tl.vl[j];
    }
    return TabulatedTimeline(ax, tl.n_x(), std::move(values));
}

}  // namespace grin
