#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "lfdc/convolution.hpp"
#include "lfdc/grid.hpp"
#include "lfdc/spectral.hpp"

namespace lfdc {

/// One term of a kernel: weight times the periodized repulsive exponential
/// with length scale L. A negative weight turns the term attractive.
struct KernelComponent {
  double weight = 1.0;
  double length_scale = pi;
};

/// Parametrization of an odd, periodic, soft-core interaction kernel.
class KernelSpec {
 public:
  KernelSpec() : KernelSpec(std::vector<KernelComponent>{{1.0, pi}}) {}

  explicit KernelSpec(std::vector<KernelComponent> components, int dim = 1, int truncation = 10)
      : components_(std::move(components)), dim_(dim), truncation_(truncation) {
    if (components_.empty()) throw Error(ErrorKind::invalid_argument, "kernel needs a component");
    for (const auto& c : components_)
      if (!(c.length_scale > 0.0) || !std::isfinite(c.length_scale))
        throw Error(ErrorKind::invalid_argument, "kernel length scale must be positive");
    if (dim_ != 1 && dim_ != 2) throw Error(ErrorKind::invalid_argument, "kernel dim must be 1 or 2");
    if (truncation_ < 1) throw Error(ErrorKind::invalid_argument, "truncation_K must be >= 1");
  }

  /// Single repulsive component with unit weight.
  static KernelSpec repulsive(double length_scale, int dim = 1, int truncation = 10) {
    return KernelSpec({{1.0, length_scale}}, dim, truncation);
  }

  const std::vector<KernelComponent>& components() const { return components_; }
  int dim() const { return dim_; }
  int truncation() const { return truncation_; }

  /// True for the single unit-weight repulsive kernel, the case with a
  /// closed-form deconvolution.
  bool is_single_repulsive() const {
    return components_.size() == 1 && components_.front().weight == 1.0;
  }
  double length_scale() const { return components_.front().length_scale; }

  std::string key() const {
    std::ostringstream os;
    os.precision(17);
    os << dim_ << ':' << truncation_;
    for (const auto& c : components_) os << ':' << c.weight << ',' << c.length_scale;
    return os.str();
  }

 private:
  std::vector<KernelComponent> components_;
  int dim_;
  int truncation_;
};

inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

/// Non-periodic repulsive kernel sgn(x) exp(-|x| / L).
inline double repulsive_free(double x, double length_scale) {
  return sign(x) * std::exp(-std::abs(x) / length_scale);
}

/// Closed-form periodization of repulsive_free on [-pi, pi):
///   sgn(x) / (e^{2pi/L} - 1) [e^{(2pi - |x|)/L} - e^{|x|/L}],
/// evaluated in the equivalent form scaled by e^{-2pi/L} so small L does not
/// overflow.
inline double repulsive_periodic(double x, double length_scale) {
  const double a = std::abs(x);
  const double num = std::exp(-a / length_scale) - std::exp((a - two_pi) / length_scale);
  return sign(x) * num / -std::expm1(-two_pi / length_scale);
}

inline double kernel_eval_1d(const KernelSpec& spec, WrappedDisplacement x) {
  double sum = 0.0;
  for (const auto& c : spec.components()) sum += c.weight * repulsive_periodic(x.value(), c.length_scale);
  return sum;
}

/// Truncated periodization sum_{k=-K}^{K} f_hat(x + 2 pi k). Terms k and -k
/// are added pairwise so an odd f_hat gives an exactly odd result.
template <class Fn>
double periodize_series(Fn&& f_hat, double x, int truncation) {
  double sum = f_hat(x);
  for (int k = 1; k <= truncation; ++k) {
    const double shift = two_pi * k;
    sum += f_hat(x + shift) + f_hat(x - shift);
  }
  return sum;
}

/// Radial exponential (x / |x|) exp(-|x| / L), zero at the origin.
inline std::array<double, 2> radial_free_2d(double x1, double x2, double length_scale) {
  const double r = std::hypot(x1, x2);
  if (r == 0.0) return {0.0, 0.0};
  const double s = std::exp(-r / length_scale) / r;
  return {x1 * s, x2 * s};
}

/// Truncated double-series periodization of radial_free_2d over
/// |k1|, |k2| <= truncation, summed in +-k pairs.
inline std::array<double, 2> periodize_series_2d(double x1, double x2, double length_scale,
                                                 int truncation) {
  std::array<double, 2> sum = radial_free_2d(x1, x2, length_scale);
  for (int k1 = 0; k1 <= truncation; ++k1) {
    for (int k2 = -truncation; k2 <= truncation; ++k2) {
      if (k1 == 0 && k2 <= 0) continue;
      const double s1 = two_pi * k1;
      const double s2 = two_pi * k2;
      const auto p = radial_free_2d(x1 + s1, x2 + s2, length_scale);
      const auto m = radial_free_2d(x1 - s1, x2 - s2, length_scale);
      sum[0] += p[0] + m[0];
      sum[1] += p[1] + m[1];
    }
  }
  return sum;
}

inline std::array<double, 2> kernel_eval_2d(const KernelSpec& spec, double x1, double x2,
                                            int truncation) {
  std::array<double, 2> sum{0.0, 0.0};
  for (const auto& c : spec.components()) {
    const auto v = periodize_series_2d(x1, x2, c.length_scale, truncation);
    sum[0] += c.weight * v[0];
    sum[1] += c.weight * v[1];
  }
  return sum;
}

inline std::array<double, 2> kernel_eval_2d(const KernelSpec& spec, double x1, double x2) {
  return kernel_eval_2d(spec, x1, x2, spec.truncation());
}

/// Kernel samples on the displacement lattice of a grid, with their spectra.
/// Entry m holds the kernel at wrap(m * dx); the table is antisymmetrized
/// (t[-m] = -t[m]) so the lattice kernel is exactly odd.
class KernelTable {
 public:
  KernelTable(const KernelSpec& spec, const PeriodicGrid& grid) : spec_(spec), grid_(grid) {
    if (spec.dim() != grid.dim())
      throw Error(ErrorKind::grid_mismatch, "kernel and grid dimensions differ");
    const std::size_t n = grid.n();
    const double dx = grid.dx();
    if (grid.dim() == 1) {
      PeriodicField t(grid);
      for (std::size_t m = 0; m < n; ++m)
        t[m] = kernel_eval_1d(spec, WrappedDisplacement::wrap(static_cast<double>(m) * dx));
      samples_.push_back(antisymmetrize(t));
    } else {
      check_truncation(spec);
      PeriodicField t1(grid), t2(grid);
      for (std::size_t m2 = 0; m2 < n; ++m2) {
        const double d2 = WrappedDisplacement::wrap(static_cast<double>(m2) * dx);
        for (std::size_t m1 = 0; m1 < n; ++m1) {
          const double d1 = WrappedDisplacement::wrap(static_cast<double>(m1) * dx);
          const auto v = kernel_eval_2d(spec, d1, d2);
          t1.at(m1, m2) = v[0];
          t2.at(m1, m2) = v[1];
        }
      }
      samples_.push_back(antisymmetrize(t1));
      samples_.push_back(antisymmetrize(t2));
    }
    for (const auto& s : samples_) spectra_.push_back(spectral_transform(s));
  }

  const KernelSpec& spec() const { return spec_; }
  const PeriodicGrid& grid() const { return grid_; }
  int components() const { return static_cast<int>(samples_.size()); }
  const PeriodicField& samples(int axis = 0) const { return samples_.at(static_cast<std::size_t>(axis)); }
  const SpectralField& spectrum(int axis = 0) const { return spectra_.at(static_cast<std::size_t>(axis)); }

 private:
  static PeriodicField antisymmetrize(const PeriodicField& t) {
    const PeriodicGrid& g = t.grid();
    const std::size_t n = g.n();
    PeriodicField out(g);
    if (g.dim() == 1) {
      for (std::size_t m = 0; m < n; ++m) out[m] = 0.5 * (t[m] - t[(n - m) % n]);
    } else {
      for (std::size_t m2 = 0; m2 < n; ++m2)
        for (std::size_t m1 = 0; m1 < n; ++m1)
          out.at(m1, m2) = 0.5 * (t.at(m1, m2) - t.at((n - m1) % n, (n - m2) % n));
    }
    return out;
  }

  // The K-term series must have converged: compare against K + 4 terms.
  static void check_truncation(const KernelSpec& spec) {
    const double probes[][2] = {{1.0, 1.0}, {pi / 2, -pi / 3}, {-3.0, 2.5}, {0.1, -0.05}};
    for (const auto& p : probes) {
      const auto a = kernel_eval_2d(spec, p[0], p[1], spec.truncation());
      const auto b = kernel_eval_2d(spec, p[0], p[1], spec.truncation() + 4);
      if (std::abs(a[0] - b[0]) >= 1e-6 || std::abs(a[1] - b[1]) >= 1e-6)
        throw Error(ErrorKind::invalid_argument,
                    "2D kernel series not converged at truncation_K = " +
                        std::to_string(spec.truncation()));
    }
  }

  KernelSpec spec_;
  PeriodicGrid grid_;
  std::vector<PeriodicField> samples_;
  std::vector<SpectralField> spectra_;
};

/// Process-wide cache of kernel tables keyed by (spec, grid).
inline std::shared_ptr<const KernelTable> shared_kernel_table(const KernelSpec& spec,
                                                              const PeriodicGrid& grid) {
  static std::mutex mutex;
  static std::map<std::string, std::shared_ptr<const KernelTable>> cache;
  const std::string key = spec.key() + "@" + std::to_string(grid.dim()) + "x" + std::to_string(grid.n());
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto table = std::make_shared<const KernelTable>(spec, grid);
  std::lock_guard<std::mutex> lock(mutex);
  return cache.emplace(key, std::move(table)).first->second;
}

/// v = f * rho for a 1D kernel.
inline PeriodicField convolve(const KernelTable& kernel, const PeriodicField& rho) {
  if (kernel.components() != 1) throw Error(ErrorKind::invalid_argument, "expected a 1D kernel");
  PeriodicField v = circular_convolve(kernel.spectrum(0), rho);
  v.set_kind(FieldKind::velocity);
  return v;
}

/// v = f * rho for a 2D (vector-valued) kernel.
inline VectorField2 convolve_2d(const KernelTable& kernel, const PeriodicField& rho) {
  if (kernel.components() != 2) throw Error(ErrorKind::invalid_argument, "expected a 2D kernel");
  VectorField2 v(circular_convolve(kernel.spectrum(0), rho), circular_convolve(kernel.spectrum(1), rho));
  v.x1.set_kind(FieldKind::velocity);
  v.x2.set_kind(FieldKind::velocity);
  return v;
}

}  // namespace lfdc
