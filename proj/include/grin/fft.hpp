#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>

#include <fftw3.h>

#include "grin/errors.hpp"

namespace grin {

namespace detail {

// FFTW's planner is not re-entrant; plan execution on distinct buffers is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

struct PlanDestroy {
    void operator()(fftw_plan p) const {
        if (p) {
            std::lock_guard lock(fftw_planner_mutex());
            fftw_destroy_plan(p);
        }
    }
};

using PlanHandle = std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDestroy>;

}  // namespace detail

// In-place complex 1D transform on an owned, aligned buffer. One instance per
// thread; never shared between concurrent propagations.
class FourierWorkspace {
public:
    explicit FourierWorkspace(std::size_t n)
        : n_(n), buf_(static_cast<std::complex<double>*>(
                     fftw_malloc(sizeof(std::complex<double>) * n))) {
        require(n > 0, "FourierWorkspace: empty transform");
        if (!buf_) throw InternalError("FourierWorkspace: allocation failed");
        auto* raw = reinterpret_cast<fftw_complex*>(buf_.get());
        std::lock_guard lock(detail::fftw_planner_mutex());
        const int len = static_cast<int>(n);
        forward_.reset(fftw_plan_dft_1d(len, raw, raw, FFTW_FORWARD, FFTW_ESTIMATE));
        backward_.reset(fftw_plan_dft_1d(len, raw, raw, FFTW_BACKWARD, FFTW_ESTIMATE));
        if (!forward_ || !backward_) throw InternalError("FourierWorkspace: planning failed");
    }

    FourierWorkspace(const FourierWorkspace&) = delete;
    FourierWorkspace& operator=(const FourierWorkspace&) = delete;
    FourierWorkspace(FourierWorkspace&&) noexcept = default;
    FourierWorkspace& operator=(FourierWorkspace&&) noexcept = default;

    std::size_t size() const { return n_; }
    std::span<std::complex<double>> data() { return {buf_.get(), n_}; }

    void forward() { fftw_execute(forward_.get()); }
    // Unnormalized: forward() then backward() scales by n.
    void backward() { fftw_execute(backward_.get()); }

private:
    std::size_t n_;
    std::unique_ptr<std::complex<double>, detail::FftwFree> buf_;
    detail::PlanHandle forward_;
    detail::PlanHandle backward_;
};

// In-place 2D type-I sine transform (RODFT00 in both directions) on a
// row-major rows x cols buffer. Applying it twice scales by 4(rows+1)(cols+1).
class SineTransform2D {
public:
    SineTransform2D(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols),
          buf_(static_cast<double*>(fftw_malloc(sizeof(double) * rows * cols))) {
        require(rows > 0 && cols > 0, "SineTransform2D: empty transform");
        if (!buf_) throw InternalError("SineTransform2D: allocation failed");
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan_.reset(fftw_plan_r2r_2d(static_cast<int>(rows), static_cast<int>(cols), buf_.get(),
                                     buf_.get(), FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE));
        if (!plan_) throw InternalError("SineTransform2D: planning failed");
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::span<double> data() { return {buf_.get(), rows_ * cols_}; }
    void execute() { fftw_execute(plan_.get()); }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::unique_ptr<double, detail::FftwFree> buf_;
    detail::PlanHandle plan_;
};

}  // namespace grin
