#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "grin/errors.hpp"
#include "grin/fft.hpp"

namespace grin {

using cplx = std::complex<double>;
using RealVector = std::vector<double>;
// Complex transverse amplitude sampled on a Grid1D (state, costate, targets).
using Field = std::vector<cplx>;

/**
 * Uniform periodic transverse grid. Points are x_j = x_min + j*dx for
 * j = 0..n-1; x_max is identified with x_min.
 */
class Grid1D {
public:
    Grid1D(double x_min, double x_max, std::size_t n) : x_min_(x_min), x_max_(x_max), n_(n) {
        require(x_max > x_min, "Grid1D: x_max must exceed x_min");
        require(n >= 8 && (n & (n - 1)) == 0, "Grid1D: n must be a power of two >= 8");
        dx_ = (x_max - x_min) / static_cast<double>(n);
    }

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    std::size_t n() const { return n_; }
    double dx() const { return dx_; }
    double length() const { return x_max_ - x_min_; }
    double x(std::size_t j) const { return x_min_ + static_cast<double>(j) * dx_; }

    RealVector points() const {
        RealVector out(n_);
        for (std::size_t j = 0; j < n_; ++j) out[j] = x(j);
        return out;
    }

    // Angular wavenumber of FFT bin j (negative frequencies in the upper half).
    double wavenumber(std::size_t j) const {
        const double k0 = 2.0 * std::numbers::pi / length();
        const auto sj = static_cast<double>(j);
        return j < n_ / 2 ? k0 * sj : k0 * (sj - static_cast<double>(n_));
    }

    bool operator==(const Grid1D&) const = default;

private:
    double x_min_;
    double x_max_;
    std::size_t n_;
    double dx_;
};

// Uniform axial grid with samples z_k = z0 + k*dz, k = 0..n_steps.
class AxialGrid {
public:
    AxialGrid(double z0, double z1, std::size_t n_steps) : z0_(z0), z1_(z1), n_steps_(n_steps) {
        require(z1 > z0, "AxialGrid: z1 must exceed z0");
        require(n_steps >= 1, "AxialGrid: need at least one step");
        dz_ = (z1 - z0) / static_cast<double>(n_steps);
    }

    double z0() const { return z0_; }
    double z1() const { return z1_; }
    double length() const { return z1_ - z0_; }
    std::size_t n_steps() const { return n_steps_; }
    std::size_t n_samples() const { return n_steps_ + 1; }
    double dz() const { return dz_; }
    double z(std::size_t k) const {
        return k == n_steps_ ? z1_ : z0_ + static_cast<double>(k) * dz_;
    }

    RealVector samples() const {
        RealVector out(n_samples());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = z(k);
        return out;
    }

    bool operator==(const AxialGrid&) const = default;

private:
    double z0_;
    double z1_;
    std::size_t n_steps_;
    double dz_;
};

// Fourier-spectral second derivative under periodic boundary conditions.
inline Field second_derivative_fourier(std::span<const cplx> f, const Grid1D& grid,
                                       FourierWorkspace& ws) {
    require(f.size() == grid.n(), "second_derivative_fourier: length mismatch");
    require(ws.size() == grid.n(), "second_derivative_fourier: workspace size mismatch");
    auto buf = ws.data();
    std::copy(f.begin(), f.end(), buf.begin());
    ws.forward();
    const double inv_n = 1.0 / static_cast<double>(grid.n());
    for (std::size_t j = 0; j < grid.n(); ++j) {
        const double k = grid.wavenumber(j);
        buf[j] *= -k * k * inv_n;
    }
    ws.backward();
    return Field(buf.begin(), buf.end());
}

inline Field second_derivative_fourier(std::span<const cplx> f, const Grid1D& grid) {
    FourierWorkspace ws(grid.n());
    return second_derivative_fourier(f, grid, ws);
}

inline RealVector second_derivative_fourier(std::span<const double> f, const Grid1D& grid) {
    require(f.size() == grid.n(), "second_derivative_fourier: length mismatch");
    const Field c(f.begin(), f.end());
    const Field d = second_derivative_fourier(std::span<const cplx>(c), grid);
    RealVector out(d.size());
    for (std::size_t j = 0; j < d.size(); ++j) out[j] = d[j].real();
    return out;
}

// Riemann sum sum_j conj(f_j) g_j dx.
inline cplx inner_product(std::span<const cplx> f, std::span<const cplx> g, const Grid1D& grid) {
    require(f.size() == g.size(), "inner_product: length mismatch");
    require(f.size() == grid.n(), "inner_product: field does not match grid");
    cplx acc{0.0, 0.0};
    for (std::size_t j = 0; j < f.size(); ++j) acc += std::conj(f[j]) * g[j];
    return acc * grid.dx();
}

inline double norm_squared(std::span<const cplx> f, const Grid1D& grid) {
    require(f.size() == grid.n(), "norm_squared: field does not match grid");
    double acc = 0.0;
    for (const auto& v : f) acc += std::norm(v);
    return acc * grid.dx();
}

inline double norm(std::span<const cplx> f, const Grid1D& grid) {
    return std::sqrt(norm_squared(f, grid));
}

inline Field normalized(Field f, const Grid1D& grid) {
    const double nrm = norm(f, grid);
    require(nrm > 0.0 && std::isfinite(nrm), "normalized: zero or non-finite field");
    for (auto& v : f) v /= nrm;
    return f;
}

inline Field to_field(std::span<const double> re) { return Field(re.begin(), re.end()); }

/**
 * Chebyshev–Gauss–Lobatto collocation on [a, b]. Nodes are stored in
 * ascending order; d2 is the second-derivative operator restricted to the
 * interior nodes (Dirichlet rows and columns removed).
 */
class ChebOperator {
public:
    ChebOperator(double a, double b, std::size_t n_nodes) : a_(a), b_(b) {
        require(b > a, "ChebOperator: empty interval");
        require(n_nodes >= 3, "ChebOperator: need at least 3 nodes");
        const std::size_t deg = n_nodes - 1;
        nodes_.resize(n_nodes);
        weights_.resize(n_nodes);
        for (std::size_t j = 0; j < n_nodes; ++j) {
            const double t = std::cos(std::numbers::pi * static_cast<double>(j) /
                                      static_cast<double>(deg));
            nodes_[j] = a + 0.5 * (b - a) * (1.0 - t);
            weights_[j] = (j % 2 == 0 ? 1.0 : -1.0) * ((j == 0 || j == deg) ? 0.5 : 1.0);
        }
        nodes_.front() = a;
        nodes_.back() = b;

        d1_ = Eigen::MatrixXd::Zero(n_nodes, n_nodes);
        for (std::size_t i = 0; i < n_nodes; ++i) {
            double diag = 0.0;
            for (std::size_t j = 0; j < n_nodes; ++j) {
                if (i == j) continue;
                const double v = (weights_[j] / weights_[i]) / (nodes_[i] - nodes_[j]);
                d1_(i, j) = v;
                diag -= v;
            }
            d1_(i, i) = diag;
        }
        const Eigen::MatrixXd full_d2 = d1_ * d1_;
        d2_ = full_d2.block(1, 1, n_nodes - 2, n_nodes - 2);
        neg_d2_lu_ = Eigen::PartialPivLU<Eigen::MatrixXd>(-d2_);

        // Clenshaw-Curtis weights (node order does not matter by symmetry).
        quad_.assign(n_nodes, 0.0);
        const double half = 0.5 * (b - a);
        for (std::size_t j = 0; j < n_nodes; ++j) {
            const double theta = std::numbers::pi * static_cast<double>(j) / static_cast<double>(deg);
            double acc = 1.0;
            for (std::size_t k = 1; k <= deg / 2; ++k) {
                const double bk = (2 * k == deg) ? 1.0 : 2.0;
                acc -= bk * std::cos(2.0 * static_cast<double>(k) * theta) /
                       (4.0 * static_cast<double>(k * k) - 1.0);
            }
            const double cj = (j == 0 || j == deg) ? 1.0 : 2.0;
            quad_[j] = half * cj * acc / static_cast<double>(deg);
        }
    }

    std::pair<double, double> interval() const { return {a_, b_}; }
    std::size_t n_nodes() const { return nodes_.size(); }
    const RealVector& nodes() const { return nodes_; }
    const RealVector& barycentric_weights() const { return weights_; }
    const Eigen::MatrixXd& d1() const { return d1_; }
    const Eigen::MatrixXd& d2() const { return d2_; }
    const Eigen::PartialPivLU<Eigen::MatrixXd>& neg_d2_lu() const { return neg_d2_lu_; }
    const RealVector& quadrature_weights() const { return quad_; }

    // Barycentric interpolation of node values at an arbitrary point in [a, b].
    double evaluate(std::span<const double> values, double z) const {
        require(values.size() == nodes_.size(), "ChebOperator::evaluate: size mismatch");
        double num = 0.0;
        double den = 0.0;
        for (std::size_t j = 0; j < nodes_.size(); ++j) {
            const double diff = z - nodes_[j];
            if (diff == 0.0) return values[j];
            const double w = weights_[j] / diff;
            num += w * values[j];
            den += w;
        }
        return num / den;
    }

private:
    double a_;
    double b_;
    RealVector nodes_;
    RealVector weights_;
    Eigen::MatrixXd d1_;
    Eigen::MatrixXd d2_;
    Eigen::PartialPivLU<Eigen::MatrixXd> neg_d2_lu_;
    RealVector quad_;
};

// Solves -w'' = rhs at interior nodes with w = 0 at both endpoints.
inline RealVector solve_dirichlet_poisson_1d(std::span<const double> rhs, const ChebOperator& op) {
    require(rhs.size() == op.n_nodes(), "solve_dirichlet_poisson_1d: rhs not sampled at nodes");
    const auto m = static_cast<Eigen::Index>(op.n_nodes() - 2);
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) b(i) = rhs[static_cast<std::size_t>(i) + 1];
    const Eigen::VectorXd w = op.neg_d2_lu().solve(b);
    if (!w.allFinite()) throw InternalError("solve_dirichlet_poisson_1d: singular collocation matrix");
    RealVector out(op.n_nodes(), 0.0);
    for (Eigen::Index i = 0; i < m; ++i) out[static_cast<std::size_t>(i) + 1] = w(i);
    return out;
}

namespace detail {

// Four-point Lagrange interpolation on the uniform axial grid (exact for cubics).
inline double local_cubic(std::span<const double> samples, const AxialGrid& axial, double z) {
    const std::size_t last = axial.n_steps();
    const double s = (z - axial.z0()) / axial.dz();
    auto i = static_cast<std::ptrdiff_t>(std::floor(s));
    if (last < 3) {
        // Too few samples for a cubic stencil; fall back to linear.
        i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(last) - 1);
        const double t = s - static_cast<double>(i);
        return (1.0 - t) * samples[static_cast<std::size_t>(i)] +
               t * samples[static_cast<std::size_t>(i) + 1];
    }
    const std::ptrdiff_t start =
        std::clamp<std::ptrdiff_t>(i - 1, 0, static_cast<std::ptrdiff_t>(last) - 3);
    double acc = 0.0;
    for (std::ptrdiff_t a = 0; a < 4; ++a) {
        const double xa = static_cast<double>(start + a);
        double basis = 1.0;
        for (std::ptrdiff_t b = 0; b < 4; ++b) {
            if (b == a) continue;
            const double xb = static_cast<double>(start + b);
            basis *= (s - xb) / (xa - xb);
        }
        acc += basis * samples[static_cast<std::size_t>(start + a)];
    }
    return acc;
}

}  // namespace detail

inline RealVector interpolate_uniform_to_cheb(std::span<const double> samples,
                                              const AxialGrid& axial, const ChebOperator& op) {
    require(samples.size() == axial.n_samples(), "interpolate_uniform_to_cheb: size mismatch");
    const double tol = 1e-12 * std::max(1.0, std::abs(axial.z1()) + std::abs(axial.z0()));
    RealVector out(op.n_nodes());
    for (std::size_t j = 0; j < op.n_nodes(); ++j) {
        const double z = op.nodes()[j];
        require(z >= axial.z0() - tol && z <= axial.z1() + tol,
                "interpolate_uniform_to_cheb: node outside source interval");
        out[j] = detail::local_cubic(samples, axial, std::clamp(z, axial.z0(), axial.z1()));
    }
    return out;
}

inline RealVector interpolate_cheb_to_uniform(std::span<const double> values,
                                              const ChebOperator& op, const AxialGrid& axial) {
    require(values.size() == op.n_nodes(), "interpolate_cheb_to_uniform: size mismatch");
    const auto [a, b] = op.interval();
    const double tol = 1e-12 * std::max(1.0, std::abs(a) + std::abs(b));
    RealVector out(axial.n_samples());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double z = axial.z(k);
        require(z >= a - tol && z <= b + tol,
                "interpolate_cheb_to_uniform: sample outside collocation interval");
        out[k] = op.evaluate(values, std::clamp(z, a, b));
    }
    return out;
}

}  // namespace grin
