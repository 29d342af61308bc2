#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>

#include "grin/errors.hpp"
#include "grin/fft.hpp"
#include "grin/spectral.hpp"

namespace grin {

/**
 * Solves -(D_xx + D_zz) w = rhs for the 5-point Laplacian on a rectangle with
 * w = 0 on the boundary. `rhs` holds only interior values, row-major with
 * `rows` z-rows of `cols` x-points; the boundary lies one spacing outside.
 * Exact for the discrete operator (sine-transform diagonalization).
 */
inline RealVector solve_dirichlet_poisson_2d(std::span<const double> rhs, std::size_t rows,
                                             std::size_t cols, double hx, double hz) {
    require(rows >= 1 && cols >= 1, "solve_dirichlet_poisson_2d: empty interior");
    require(rhs.size() == rows * cols, "solve_dirichlet_poisson_2d: rhs size mismatch");
    require(hx > 0.0 && hz > 0.0, "solve_dirichlet_poisson_2d: spacings must be positive");
    SineTransform2D dst(rows, cols);
    auto buf = dst.data();
    std::copy(rhs.begin(), rhs.end(), buf.begin());
    dst.execute();

    RealVector lx(cols);
    RealVector lz(rows);
    for (std::size_t p = 0; p < cols; ++p)
        lx[p] = (2.0 - 2.0 * std::cos(std::numbers::pi * static_cast<double>(p + 1) /
                                      static_cast<double>(cols + 1))) / (hx * hx);
    for (std::size_t q = 0; q < rows; ++q)
        lz[q] = (2.0 - 2.0 * std::cos(std::numbers::pi * static_cast<double>(q + 1) /
                                      static_cast<double>(rows + 1))) / (hz * hz);
    const double scale = 1.0 / (4.0 * static_cast<double>(rows + 1) * static_cast<double>(cols + 1));
    for (std::size_t q = 0; q < rows; ++q)
        for (std::size_t p = 0; p < cols; ++p) buf[q * cols + p] *= scale / (lx[p] + lz[q]);

    dst.execute();
    RealVector out(buf.begin(), buf.end());
    for (double v : out)
        if (!std::isfinite(v)) throw InternalError("solve_dirichlet_poisson_2d: non-finite solution");
    return out;
}

// Applies -(D_xx + D_zz) to interior values with zero boundary data.
inline RealVector apply_negative_laplacian_2d(std::span<const double> w, std::size_t rows,
                                              std::size_t cols, double hx, double hz) {
    require(w.size() == rows * cols, "apply_negative_laplacian_2d: size mismatch");
    RealVector out(w.size());
    auto at = [&](std::ptrdiff_t q, std::ptrdiff_t p) -> double {
        if (q < 0 || p < 0 || q >= static_cast<std::ptrdiff_t>(rows) || p >= static_cast<std::ptrdiff_t>(cols))
            return 0.0;
        return w[static_cast<std::size_t>(q) * cols + static_cast<std::size_t>(p)];
    };
    for (std::size_t q = 0; q < rows; ++q) {
        for (std::size_t p = 0; p < cols; ++p) {
            const auto qi = static_cast<std::ptrdiff_t>(q);
            const auto pi = static_cast<std::ptrdiff_t>(p);
            const double c = at(qi, pi);
            out[q * cols + p] = (2.0 * c - at(qi, pi - 1) - at(qi, pi + 1)) / (hx * hx) +
                                (2.0 * c - at(qi - 1, pi) - at(qi + 1, pi)) / (hz * hz);
        }
    }
    return out;
}

}  // namespace grin
