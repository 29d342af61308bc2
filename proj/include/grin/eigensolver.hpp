#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Eigenvalues>

#include "grin/errors.hpp"
#include "grin/fft.hpp"
#include "grin/potentials.hpp"
#include "grin/spectral.hpp"

namespace grin {

struct EigenPair {
    double lambda = 0.0;
    Field phi;  // real-valued, unit L2 norm
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

// Applies -1/2 d^2/dx^2 + V spectrally to a real vector.
class SpectralHamiltonian {
public:
    SpectralHamiltonian(const PotentialSamples& v, const Grid1D& grid)
        : v_(v.values), grid_(grid), ws_(grid.n()) {}

    void apply(std::span<const double> in, std::span<double> out) {
        auto buf = ws_.data();
        for (std::size_t j = 0; j < in.size(); ++j) buf[j] = in[j];
        ws_.forward();
        const double scale = 0.5 / static_cast<double>(grid_.n());
        for (std::size_t j = 0; j < grid_.n(); ++j) {
            const double k = grid_.wavenumber(j);
            buf[j] *= k * k * scale;
        }
        ws_.backward();
        for (std::size_t j = 0; j < in.size(); ++j) out[j] = buf[j].real() + v_[j] * in[j];
    }

    const RealVector& potential() const { return v_; }
    const Grid1D& grid() const { return grid_; }

private:
    RealVector v_;
    Grid1D grid_;
    FourierWorkspace ws_;
};

// Second-order finite-difference -1/2 d^2/dx^2 + V - shift as a symmetric
// tridiagonal matrix, solved by the Thomas algorithm.
class TridiagonalShifted {
public:
    TridiagonalShifted(const PotentialSamples& v, const Grid1D& grid, double shift)
        : n_(grid.n()), off_(-0.5 / (grid.dx() * grid.dx())), diag_(grid.n()) {
        const double kin = 1.0 / (grid.dx() * grid.dx());
        for (std::size_t j = 0; j < n_; ++j) diag_[j] = kin + v.values[j] - shift;
    }

    void solve(std::span<const double> rhs, std::span<double> out) const {
        RealVector c(n_);
        RealVector d(n_);
        c[0] = off_ / diag_[0];
        d[0] = rhs[0] / diag_[0];
        for (std::size_t i = 1; i < n_; ++i) {
            const double m = diag_[i] - off_ * c[i - 1];
            c[i] = off_ / m;
            d[i] = (rhs[i] - off_ * d[i - 1]) / m;
        }
        out[n_ - 1] = d[n_ - 1];
        for (std::size_t i = n_ - 1; i-- > 0;) out[i] = d[i] - c[i] * out[i + 1];
    }

private:
    std::size_t n_;
    double off_;
    RealVector diag_;
};

inline double fd_lowest_eigenvalue(const PotentialSamples& v, const Grid1D& grid) {
    const auto n = static_cast<Eigen::Index>(grid.n());
    Eigen::VectorXd diag(n);
    Eigen::VectorXd sub(n - 1);
    const double kin = 1.0 / (grid.dx() * grid.dx());
    for (Eigen::Index j = 0; j < n; ++j) diag(j) = kin + v.values[static_cast<std::size_t>(j)];
    sub.setConstant(-0.5 * kin);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw InternalError("ground_state: tridiagonal eigensolve failed");
    return es.eigenvalues()(0);
}

enum class CgStatus { converged, indefinite, stalled };

// Preconditioned CG for (H - shift) x = b with the FD operator as preconditioner.
inline CgStatus shifted_pcg(SpectralHamiltonian& h, double shift, const TridiagonalShifted& pre,
                            std::span<const double> b, std::span<double> x, double rel_tol,
                            std::size_t max_iters) {
    const std::size_t n = b.size();
    RealVector r(b.begin(), b.end());
    RealVector z(n);
    RealVector p(n);
    RealVector ap(n);
    std::fill(x.begin(), x.end(), 0.0);
    const double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0) return CgStatus::converged;
    pre.solve(r, z);
    p = z;
    double rz = dot(r, z);
    for (std::size_t it = 0; it < max_iters; ++it) {
        h.apply(p, ap);
        for (std::size_t j = 0; j < n; ++j) ap[j] -= shift * p[j];
        const double pap = dot(p, ap);
        if (!(pap > 0.0)) return CgStatus::indefinite;
        const double alpha = rz / pap;
        for (std::size_t j = 0; j < n; ++j) {
            x[j] += alpha * p[j];
            r[j] -= alpha * ap[j];
        }
        if (std::sqrt(dot(r, r)) <= rel_tol * bnorm) return CgStatus::converged;
        pre.solve(r, z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t j = 0; j < n; ++j) p[j] = z[j] + beta * p[j];
    }
    return CgStatus::stalled;
}

inline void normalize_real(std::span<double> v, double dx) {
    const double nrm = std::sqrt(dot(v, v) * dx);
    for (auto& e : v) e /= nrm;
}

inline void fix_sign_negative_peak(std::span<double> v) {
    std::size_t imax = 0;
    for (std::size_t j = 1; j < v.size(); ++j)
        if (std::abs(v[j]) > std::abs(v[imax])) imax = j;
    if (v[imax] > 0.0)
        for (auto& e : v) e = -e;
}

}  // namespace detail

// L2 norm of (-1/2 d^2/dx^2 + V - lambda) phi with the spectral Laplacian.
inline double eigen_residual(const PotentialSamples& v, const Grid1D& grid, const EigenPair& pair) {
    const Field lap = second_derivative_fourier(std::span<const cplx>(pair.phi), grid);
    double acc = 0.0;
    for (std::size_t j = 0; j < grid.n(); ++j) {
        const cplx r = -0.5 * lap[j] + (v.values[j] - pair.lambda) * pair.phi[j];
        acc += std::norm(r);
    }
    return std::sqrt(acc * grid.dx());
}

/**
 * Lowest eigenpair of -1/2 d^2/dx^2 + V. A tridiagonal finite-difference
 * solve supplies a shift below the spectral ground state (the FD kinetic
 * symbol never exceeds k^2), then shifted inverse iteration on the spectral
 * operator polishes the pair until the residual drops below 1e-8.
 * The eigenfunction's largest-magnitude sample is negative.
 */
inline EigenPair ground_state(const PotentialSamples& v, const Grid1D& grid) {
    require(v.size() == grid.n(), "ground_state: potential does not match grid");
    for (double e : v.values) require(std::isfinite(e), "ground_state: non-finite potential");

    const double asymptote = std::min(v.values.front(), v.values.back());
    const double lambda_fd = detail::fd_lowest_eigenvalue(v, grid);
    const double margin = 1e-9 * std::max(1.0, std::abs(asymptote));
    if (!(lambda_fd < asymptote - margin))
        throw NoBoundStateError("ground_state: no bound state below the asymptotic value " +
                                std::to_string(asymptote));

    const std::size_t n = grid.n();
    const double dx = grid.dx();
    detail::SpectralHamiltonian h(v, grid);
    RealVector x(n);
    RealVector hx(n);
    RealVector next(n);

    double delta = 1e-3 * std::max(1.0, std::abs(lambda_fd));
    for (int attempt = 0; attempt < 8; ++attempt, delta *= 10.0) {
        const double shift = lambda_fd - delta;
        const detail::TridiagonalShifted pre(v, grid, shift);

        // Start from the FD eigenvector estimate (inverse iteration on the tridiagonal matrix).
        std::fill(x.begin(), x.end(), 1.0);
        for (int it = 0; it < 4; ++it) {
            pre.solve(x, next);
            x.swap(next);
            detail::normalize_real(x, dx);
        }

        bool indefinite = false;
        double lambda = 0.0;
        for (int it = 0; it < 200; ++it) {
            h.apply(x, hx);
            lambda = detail::dot(x, hx) * dx;
            double res = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double r = hx[j] - lambda * x[j];
                res += r * r;
            }
            res = std::sqrt(res * dx);
            if (res < 1e-8) {
                if (!(lambda < asymptote - margin))
                    throw NoBoundStateError("ground_state: no bound state below the asymptotic value " +
                                            std::to_string(asymptote));
                detail::fix_sign_negative_peak(x);
                return EigenPair{lambda, to_field(x)};
            }
            const auto status = detail::shifted_pcg(h, shift, pre, x, next, 1e-14, 2000);
            if (status == detail::CgStatus::indefinite) {
                indefinite = true;
                break;
            }
            x.swap(next);
            detail::normalize_real(x, dx);
        }
        if (!indefinite) break;
    }
    throw InternalError("ground_state: inverse iteration did not converge");
}

// Threshold below which target amplitudes are not inverted, as a fraction of max|target|.
inline constexpr double kDefaultInversionFloor = 1e-6;

/**
 * Potential whose ground state is `target`: V = lambda_gauge + (1/2) target''/target
 * where |target| >= floor * max|target|, continued as a constant from the nearest
 * point of that region elsewhere.
 */
inline PotentialSamples invert_potential(std::span<const cplx> target, const Grid1D& grid,
                                         double lambda_gauge,
                                         double floor = kDefaultInversionFloor) {
    require(target.size() == grid.n(), "invert_potential: target does not match grid");
    require(floor > 0.0, "invert_potential: floor must be positive");
    double amax = 0.0;
    for (const auto& t : target) amax = std::max(amax, std::abs(t));
    require(amax > 0.0, "invert_potential: zero target");
    for (const auto& t : target)
        require(std::abs(t.imag()) <= 1e-12 * amax, "invert_potential: target must be real-valued");

    const double threshold = floor * amax;
    const RealVector re = [&] {
        RealVector r(target.size());
        for (std::size_t j = 0; j < r.size(); ++j) r[j] = target[j].real();
        return r;
    }();
    const RealVector lap = second_derivative_fourier(std::span<const double>(re), grid);

    const std::size_t n = grid.n();
    std::vector<bool> inside(n);
    int sign = 0;
    for (std::size_t j = 0; j < n; ++j) {
        inside[j] = std::abs(re[j]) >= threshold;
        if (!inside[j]) continue;
        const int s = re[j] > 0.0 ? 1 : -1;
        if (sign == 0) sign = s;
        if (s != sign) throw ContractError("invert_potential: target changes sign (ground states are nodeless)");
    }

    PotentialSamples v{RealVector(n)};
    for (std::size_t j = 0; j < n; ++j)
        if (inside[j]) v.values[j] = lambda_gauge + 0.5 * lap[j] / re[j];

    // Constant continuation from the nearest supported point.
    std::vector<std::ptrdiff_t> left(n, -1);
    std::vector<std::ptrdiff_t> right(n, -1);
    std::ptrdiff_t last = -1;
    for (std::size_t j = 0; j < n; ++j) {
        if (inside[j]) last = static_cast<std::ptrdiff_t>(j);
        left[j] = last;
    }
    last = -1;
    for (std::size_t j = n; j-- > 0;) {
        if (inside[j]) last = static_cast<std::ptrdiff_t>(j);
        right[j] = last;
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (inside[j]) continue;
        const auto l = left[j];
        const auto r = right[j];
        std::ptrdiff_t src;
        if (l < 0) src = r;
        else if (r < 0) src = l;
        else src = (static_cast<std::ptrdiff_t>(j) - l <= r - static_cast<std::ptrdiff_t>(j)) ? l : r;
        v.values[j] = v.values[static_cast<std::size_t>(src)];
    }
    return v;
}

// Gauge that places the minimum of the inverted potential at `depth`.
inline double gauge_for_minimum(std::span<const cplx> target, const Grid1D& grid, double depth = -1.0,
                                double floor = kDefaultInversionFloor) {
    const PotentialSamples v0 = invert_potential(target, grid, 0.0, floor);
    return depth - *std::min_element(v0.values.begin(), v0.values.end());
}

struct TerminalRefinement {
    PotentialSamples potential;
    EigenPair state;  // the proxy desired state
    std::size_t iterations = 0;
    RealVector misfit_history;
};

namespace detail {

// Half squared L2 distance between target and the sign-aligned eigenfunction.
inline double proxy_misfit(std::span<const cplx> target, const EigenPair& pair, const Grid1D& grid,
                           double* sign_out = nullptr) {
    const double s = inner_product(target, pair.phi, grid).real() >= 0.0 ? 1.0 : -1.0;
    double acc = 0.0;
    for (std::size_t j = 0; j < target.size(); ++j) acc += std::norm(target[j] - s * pair.phi[j]);
    if (sign_out) *sign_out = s;
    return 0.5 * acc * grid.dx();
}

// Solves (H - lambda) y = P rhs on the complement of phi by projected CG.
inline RealVector solve_deflated(SpectralHamiltonian& h, double lambda, std::span<const double> phi,
                                 RealVector rhs, double dx) {
    const std::size_t n = rhs.size();
    auto project = [&](std::span<double> w) {
        const double c = dot(phi, w) * dx;
        for (std::size_t j = 0; j < n; ++j) w[j] -= c * phi[j];
    };
    project(rhs);
    RealVector y(n, 0.0);
    RealVector r = rhs;
    RealVector p = r;
    RealVector ap(n);
    double rr = dot(r, r);
    const double bnorm = std::sqrt(rr);
    if (bnorm == 0.0) return y;
    for (std::size_t it = 0; it < 20 * n; ++it) {
        h.apply(p, ap);
        for (std::size_t j = 0; j < n; ++j) ap[j] -= lambda * p[j];
        project(ap);
        const double pap = dot(p, ap);
        if (!(pap > 0.0)) break;
        const double alpha = rr / pap;
        for (std::size_t j = 0; j < n; ++j) {
            y[j] += alpha * p[j];
            r[j] -= alpha * ap[j];
        }
        const double rr_new = dot(r, r);
        if (std::sqrt(rr_new) <= 1e-12 * bnorm) break;
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t j = 0; j < n; ++j) p[j] = r[j] + beta * p[j];
    }
    project(y);
    return y;
}

}  // namespace detail

/**
 * Gradient descent on 1/2 ||target - phi_d(V)||^2 over the potential. The
 * gradient comes from first-order eigenpair perturbation:
 * dJ/dV(x) = s y(x) phi(x), with (H - lambda) y = P(target - s phi) on the
 * complement of phi and s the sign aligning phi with the target.
 */
inline TerminalRefinement refine_terminal_potential(const PotentialSamples& v_init,
                                                    std::span<const cplx> target,
                                                    const Grid1D& grid, std::size_t max_iters,
                                                    double tol) {
    require(target.size() == grid.n(), "refine_terminal_potential: target does not match grid");
    const std::size_t n = grid.n();
    const double dx = grid.dx();

    TerminalRefinement out{v_init, ground_state(v_init, grid), 0, {}};
    double misfit = detail::proxy_misfit(target, out.state, grid);
    out.misfit_history.push_back(misfit);

    double step = -1.0;
    int consecutive_increases = 0;
    while (misfit >= tol && out.iterations < max_iters) {
        double s = 1.0;
        detail::proxy_misfit(target, out.state, grid, &s);
        RealVector phi(n);
        RealVector rhs(n);
        for (std::size_t j = 0; j < n; ++j) {
            phi[j] = out.state.phi[j].real();
            rhs[j] = target[j].real() - s * phi[j];
        }
        detail::SpectralHamiltonian h(out.potential, grid);
        const RealVector y = detail::solve_deflated(h, out.state.lambda, phi, rhs, dx);
        RealVector grad(n);
        double gnorm2 = 0.0;
        double gmax = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            grad[j] = s * y[j] * phi[j];
            gnorm2 += grad[j] * grad[j] * dx;
            gmax = std::max(gmax, std::abs(grad[j]));
        }
        if (gmax == 0.0) break;
        if (step < 0.0) step = 0.1 / gmax;

        PotentialSamples trial{RealVector(n)};
        EigenPair trial_state;
        double trial_misfit = misfit;
        bool accepted = false;
        double alpha = step * 2.0;
        for (int bt = 0; bt < 40; ++bt, alpha *= 0.5) {
            for (std::size_t j = 0; j < n; ++j) trial.values[j] = out.potential.values[j] - alpha * grad[j];
            try {
                trial_state = ground_state(trial, grid);
            } catch (const NoBoundStateError&) {
                continue;
            }
            trial_misfit = detail::proxy_misfit(target, trial_state, grid);
            if (trial_misfit <= misfit - 1e-4 * alpha * gnorm2) {
                accepted = true;
                break;
            }
        }
        if (!accepted && trial_state.phi.empty()) break;

        consecutive_increases = trial_misfit > misfit ? consecutive_increases + 1 : 0;
        if (consecutive_increases >= 5)
            throw DivergenceError("refine_terminal_potential: misfit increased for 5 consecutive steps (last " +
                                  std::to_string(trial_misfit) + ")");
        step = alpha;
        out.potential = trial;
        out.state = trial_state;
        misfit = trial_misfit;
        out.misfit_history.push_back(misfit);
        ++out.iterations;
    }
    return out;
}

}  // namespace grin
