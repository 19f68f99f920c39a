#pragma once

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <memory>
#include <mutex>
#include <vector>

#include "sbd/error.hpp"
#include "sbd/geometry.hpp"

namespace sbd {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Periodic convolution (a * f)(x) = sum_y w a(x - y) f(y) with a fixed kernel a, via real FFTs.
class PeriodicConvolver {
public:
  PeriodicConvolver(const GridFunction& kernel) : grid_(kernel.grid()) {
    const int m = static_cast<int>(grid_.m());
    n_real_ = grid_.size();
    n_complex_ = grid_.dim() == 1 ? grid_.m() / 2 + 1 : grid_.m() * (grid_.m() / 2 + 1);
    real_ = static_cast<double*>(fftw_malloc(sizeof(double) * n_real_));
    spec_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_complex_));
    if (!real_ || !spec_) throw NumericalAbort("FFT buffer allocation failed");
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      // Row-major [i1][i0] matches the node layout i0 + M*i1.
      if (grid_.dim() == 1) {
        fwd_ = fftw_plan_dft_r2c_1d(m, real_, spec_, FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_c2r_1d(m, spec_, real_, FFTW_ESTIMATE);
      } else {
        fwd_ = fftw_plan_dft_r2c_2d(m, m, real_, spec_, FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_c2r_2d(m, m, spec_, real_, FFTW_ESTIMATE);
      }
    }
    std::memcpy(real_, kernel.values().data(), sizeof(double) * n_real_);
    fftw_execute(fwd_);
    kernel_hat_.resize(n_complex_);
    const double scale = grid_.weight() / static_cast<double>(n_real_);
    for (std::size_t i = 0; i < n_complex_; ++i)
      kernel_hat_[i] = std::complex<double>(spec_[i][0], spec_[i][1]) * scale;
  }

  PeriodicConvolver(const PeriodicConvolver&) = delete;
  PeriodicConvolver& operator=(const PeriodicConvolver&) = delete;

  ~PeriodicConvolver() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(real_);
    fftw_free(spec_);
  }

  const Grid& grid() const { return grid_; }

  std::vector<double> apply(const std::vector<double>& f) const {
    if (f.size() != n_real_) throw ModelViolation("convolution input size mismatch");
    std::memcpy(real_, f.data(), sizeof(double) * n_real_);
    fftw_execute(fwd_);
    for (std::size_t i = 0; i < n_complex_; ++i) {
      std::complex<double> v(spec_[i][0], spec_[i][1]);
      v *= kernel_hat_[i];
      spec_[i][0] = v.real();
      spec_[i][1] = v.imag();
    }
    fftw_execute(inv_);
    return std::vector<double>(real_, real_ + n_real_);
  }

  GridFunction apply(const GridFunction& f) const { return GridFunction(grid_, apply(f.values())); }

private:
  Grid grid_;
  std::size_t n_real_ = 0, n_complex_ = 0;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan fwd_ = nullptr, inv_ = nullptr;
  std::vector<std::complex<double>> kernel_hat_;
};

/// Direct O(N^2) periodic convolution, used as a reference.
inline GridFunction convolve_direct(const GridFunction& a, const GridFunction& f) {
  const Grid& g = a.grid();
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t x = 0; x < g.size(); ++x) {
    double s = 0.0;
    for (std::size_t y = 0; y < g.size(); ++y) s += a[g.offset_index(x, y)] * f[y];
    out[x] = g.weight() * s;
  }
  return GridFunction(g, std::move(out));
}

}  // namespace sbd
