#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "lfdc/grid.hpp"

namespace lfdc {

/// Discrete Fourier coefficients of a PeriodicField.
///
/// Unnormalized forward DFT over the cell index, same flat layout as the
/// field (first axis fastest). Coefficient m along an axis corresponds to the
/// signed wavenumber returned by wavenumber().
struct SpectralField {
  PeriodicGrid grid;
  std::vector<std::complex<double>> coeffs;

  std::complex<double>& operator[](std::size_t i) { return coeffs[i]; }
  const std::complex<double>& operator[](std::size_t i) const { return coeffs[i]; }
  std::size_t size() const { return coeffs.size(); }
};

/// Signed wavenumber of DFT index m on an n-point axis; the Nyquist index of
/// an even axis maps to -n/2.
inline long long wavenumber(std::size_t m, std::size_t n) {
  const auto mm = static_cast<long long>(m);
  const auto nn = static_cast<long long>(n);
  return (2 * mm < nn) ? mm : mm - nn;
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class FftPlan {
 public:
  FftPlan(int dim, std::size_t n) : total_(dim == 1 ? n : n * n) {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    buffer_ = fftw_alloc_complex(total_);
    const int ni = static_cast<int>(n);
    if (dim == 1) {
      forward_ = fftw_plan_dft_1d(ni, buffer_, buffer_, FFTW_FORWARD, FFTW_ESTIMATE);
      backward_ = fftw_plan_dft_1d(ni, buffer_, buffer_, FFTW_BACKWARD, FFTW_ESTIMATE);
    } else {
      // Row-major with the last FFTW dimension fastest, matching i1 + n * i2.
      forward_ = fftw_plan_dft_2d(ni, ni, buffer_, buffer_, FFTW_FORWARD, FFTW_ESTIMATE);
      backward_ = fftw_plan_dft_2d(ni, ni, buffer_, buffer_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
  ~FftPlan() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(buffer_);
  }

  std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(buffer_); }
  std::size_t size() const { return total_; }
  void forward() { fftw_execute(forward_); }
  void backward() { fftw_execute(backward_); }

 private:
  std::size_t total_;
  fftw_complex* buffer_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

/// Plans own their scratch buffer, so each thread keeps its own cache.
inline FftPlan& plan_for(const PeriodicGrid& grid) {
  thread_local std::map<std::pair<int, std::size_t>, std::unique_ptr<FftPlan>> cache;
  auto key = std::make_pair(grid.dim(), grid.n());
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, std::make_unique<FftPlan>(grid.dim(), grid.n())).first;
  return *it->second;
}

}  // namespace detail

inline SpectralField spectral_transform(const PeriodicField& f) {
  const PeriodicGrid& g = f.grid();
  if (g.n() < 4) throw Error(ErrorKind::invalid_argument, "spectral transform needs n >= 4");
  auto& plan = detail::plan_for(g);
  auto* buf = plan.data();
  for (std::size_t i = 0; i < f.size(); ++i) buf[i] = {f[i], 0.0};
  plan.forward();
  return SpectralField{g, std::vector<std::complex<double>>(buf, buf + plan.size())};
}

/// Inverse of spectral_transform; the imaginary part is discarded.
inline PeriodicField inverse_spectral_transform(const SpectralField& s) {
  const PeriodicGrid& g = s.grid;
  auto& plan = detail::plan_for(g);
  auto* buf = plan.data();
  std::copy(s.coeffs.begin(), s.coeffs.end(), buf);
  plan.backward();
  PeriodicField out(g);
  const double scale = 1.0 / static_cast<double>(plan.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = buf[i].real() * scale;
  return out;
}

}  // namespace lfdc
