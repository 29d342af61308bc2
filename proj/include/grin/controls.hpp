#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <utility>

#include "grin/errors.hpp"
#include "grin/spectral.hpp"

namespace grin {

inline constexpr std::size_t kDefaultAnsatzModes = 15;

/**
 * A real control function sampled on an axial grid, pinned to fixed values at
 * both ends. The endpoint samples are the boundary values, bit for bit.
 */
class Control {
public:
    Control(AxialGrid axial, RealVector samples) : axial_(axial), samples_(std::move(samples)) {
        require(samples_.size() == axial_.n_samples(), "Control: sample count does not match grid");
        u0_ = samples_.front();
        ul_ = samples_.back();
    }

    Control(AxialGrid axial, RealVector samples, double u0, double ul)
        : axial_(axial), samples_(std::move(samples)), u0_(u0), ul_(ul) {
        require(samples_.size() == axial_.n_samples(), "Control: sample count does not match grid");
        require(samples_.front() == u0_ && samples_.back() == ul_,
                "Control: endpoint samples must equal the boundary values");
    }

    static Control ramp(const AxialGrid& axial, double u0, double ul) {
        RealVector s(axial.n_samples());
        const double l = axial.length();
        for (std::size_t k = 0; k < s.size(); ++k)
            s[k] = u0 + (ul - u0) * (axial.z(k) - axial.z0()) / l;
        s.front() = u0;
        s.back() = ul;
        return Control(axial, std::move(s), u0, ul);
    }

    const AxialGrid& axial() const { return axial_; }
    const RealVector& samples() const { return samples_; }
    double u0() const { return u0_; }
    double ul() const { return ul_; }

    // Linear interpolation between samples.
    double at(double z) const {
        const double tol = 1e-12 * std::max(1.0, std::abs(axial_.z0()) + std::abs(axial_.z1()));
        require(z >= axial_.z0() - tol && z <= axial_.z1() + tol, "Control::at: z out of range");
        if (z <= axial_.z0()) return samples_.front();
        if (z >= axial_.z1()) return samples_.back();
        const double s = std::clamp((z - axial_.z0()) / axial_.dz(), 0.0,
                                    static_cast<double>(axial_.n_steps()));
        auto k = static_cast<std::size_t>(s);
        if (k >= axial_.n_steps()) return samples_.back();
        const double t = s - static_cast<double>(k);
        return (1.0 - t) * samples_[k] + t * samples_[k + 1];
    }

    // Value at the midpoint of step k.
    double midpoint(std::size_t k) const { return 0.5 * (samples_[k] + samples_[k + 1]); }

private:
    AxialGrid axial_;
    RealVector samples_;
    double u0_;
    double ul_;
};

/**
 * Coefficients of the sine-series-plus-ramp ansatz
 *   w(z) = sum_j eps_j / j^2 sin(j pi (z - z0) / l) + ramp(z).
 * The stored eps are the raw draws; the 1/j^2 decay is applied on evaluation.
 */
struct AnsatzCoefficients {
    RealVector eps;
    double u0 = 0.0;
    double ul = 0.0;
    double z0 = 0.0;
    double z1 = 1.0;

    std::size_t n_modes() const { return eps.size(); }
};

inline Control evaluate_ansatz(const AnsatzCoefficients& coeffs, const AxialGrid& axial) {
    const double tol = 1e-12 * std::max(1.0, std::abs(axial.z0()) + std::abs(axial.z1()));
    require(std::abs(axial.z0() - coeffs.z0) <= tol && std::abs(axial.z1() - coeffs.z1) <= tol,
            "evaluate_ansatz: axial grid does not match coefficient interval");
    const double l = axial.length();
    RealVector s(axial.n_samples());
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double t = (axial.z(k) - axial.z0()) / l;
        double acc = coeffs.u0 + (coeffs.ul - coeffs.u0) * t;
        for (std::size_t j = 1; j <= coeffs.eps.size(); ++j) {
            const double jj = static_cast<double>(j);
            acc += coeffs.eps[j - 1] / (jj * jj) * std::sin(jj * std::numbers::pi * t);
        }
        s[k] = acc;
    }
    s.front() = coeffs.u0;
    s.back() = coeffs.ul;
    return Control(axial, std::move(s), coeffs.u0, coeffs.ul);
}

inline AnsatzCoefficients sample_random_coefficients(std::uint64_t seed, std::size_t n_modes,
                                                     double u0 = 0.0, double ul = 0.0,
                                                     double z0 = 0.0, double z1 = 1.0) {
    require(n_modes >= 1, "sample_random_coefficients: need at least one mode");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    AnsatzCoefficients c{RealVector(n_modes), u0, ul, z0, z1};
    for (auto& e : c.eps) e = dist(rng);
    return c;
}

// Discrete sine projection of (samples - ramp), truncated to n_modes and
// rescaled by j^2. Exact on controls that lie in the span of the first
// n_modes sines (discrete orthogonality on the uniform grid).
inline AnsatzCoefficients control_to_coefficients(const Control& control,
                                                  std::size_t n_modes = kDefaultAnsatzModes) {
    const AxialGrid& axial = control.axial();
    const std::size_t m = axial.n_steps();
    require(n_modes >= 1 && n_modes < m, "control_to_coefficients: too many modes for grid");
    const Control ramp = Control::ramp(axial, control.u0(), control.ul());
    AnsatzCoefficients c{RealVector(n_modes), control.u0(), control.ul(), axial.z0(), axial.z1()};
    const auto& s = control.samples();
    const auto& r = ramp.samples();
    const double md = static_cast<double>(m);
    for (std::size_t j = 1; j <= n_modes; ++j) {
        double acc = 0.0;
        for (std::size_t k = 1; k < m; ++k)
            acc += (s[k] - r[k]) *
                   std::sin(static_cast<double>(j) * std::numbers::pi * static_cast<double>(k) / md);
        const double jj = static_cast<double>(j);
        c.eps[j - 1] = 2.0 / md * acc * jj * jj;
    }
    return c;
}

}  // namespace grin
