#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <type_traits>
#include <string>
#include <utility>
#include <vector>

#include "lfdc/error.hpp"

namespace lfdc {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Uniform cell-centered grid on the circle [-pi, pi) or the torus [-pi, pi)^2.
///
/// Cell i along an axis has its center at -pi + (i + 1/2) dx. No endpoint is
/// duplicated, so sums over the grid are sums over one period. Two-dimensional
/// data is stored row-major with the first coordinate fastest:
/// flat index = i1 + n * i2.
class PeriodicGrid {
 public:
  PeriodicGrid() = default;

  PeriodicGrid(int dim, std::size_t n) : dim_(dim), n_(n), dx_(two_pi / static_cast<double>(n)) {
    if (dim != 1 && dim != 2)
      throw Error(ErrorKind::invalid_argument, "grid dimension must be 1 or 2");
    if (n < 2) throw Error(ErrorKind::invalid_argument, "grid needs at least 2 cells per axis");
  }

  static PeriodicGrid line(std::size_t n) { return PeriodicGrid(1, n); }
  static PeriodicGrid square(std::size_t n) { return PeriodicGrid(2, n); }

  int dim() const { return dim_; }
  std::size_t n() const { return n_; }
  double dx() const { return dx_; }
  std::size_t size() const { return dim_ == 1 ? n_ : n_ * n_; }
  double cell_volume() const { return dim_ == 1 ? dx_ : dx_ * dx_; }
  double domain_volume() const { return dim_ == 1 ? two_pi : two_pi * two_pi; }

  /// Cell-center coordinate along any axis.
  double node(std::size_t i) const { return -pi + (static_cast<double>(i) + 0.5) * dx_; }

  std::vector<double> nodes() const {
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = node(i);
    return out;
  }

  std::size_t index(std::size_t i1, std::size_t i2) const { return i1 + n_ * i2; }

  /// Wraps a possibly negative or overflowing axis index onto [0, n).
  std::size_t wrap_index(long long i) const {
    const auto n = static_cast<long long>(n_);
    long long r = i % n;
    if (r < 0) r += n;
    return static_cast<std::size_t>(r);
  }

  bool operator==(const PeriodicGrid& other) const { return dim_ == other.dim_ && n_ == other.n_; }
  bool operator!=(const PeriodicGrid& other) const { return !(*this == other); }

 private:
  int dim_ = 1;
  std::size_t n_ = 0;
  double dx_ = 0.0;
};

enum class FieldKind { density, velocity, generic };

/// Real samples of a scalar field, one per grid cell.
class PeriodicField {
 public:
  PeriodicField() = default;

  explicit PeriodicField(const PeriodicGrid& grid, FieldKind kind = FieldKind::generic)
      : grid_(grid), values_(grid.size(), 0.0), kind_(kind) {}

  PeriodicField(const PeriodicGrid& grid, std::vector<double> values,
                FieldKind kind = FieldKind::generic)
      : grid_(grid), values_(std::move(values)), kind_(kind) {
    if (values_.size() != grid_.size())
      throw Error(ErrorKind::invalid_argument,
                  "field has " + std::to_string(values_.size()) + " values, grid has " +
                      std::to_string(grid_.size()) + " cells");
  }

  static PeriodicField constant(const PeriodicGrid& grid, double value,
                                FieldKind kind = FieldKind::generic) {
    return PeriodicField(grid, std::vector<double>(grid.size(), value), kind);
  }

  /// Samples fn at cell centers: fn(x) in 1D, fn(x1, x2) in 2D.
  template <class Fn>
  static PeriodicField sample(const PeriodicGrid& grid, Fn&& fn,
                              FieldKind kind = FieldKind::generic) {
    PeriodicField out(grid, kind);
    const std::size_t n = grid.n();
    if (grid.dim() == 1) {
      if constexpr (std::is_invocable_v<Fn, double>) {
        for (std::size_t i = 0; i < n; ++i) out.values_[i] = fn(grid.node(i));
      } else {
        throw Error(ErrorKind::invalid_argument, "1D sampling needs a unary function");
      }
    } else {
      if constexpr (std::is_invocable_v<Fn, double, double>) {
        for (std::size_t i2 = 0; i2 < n; ++i2)
          for (std::size_t i1 = 0; i1 < n; ++i1)
            out.values_[grid.index(i1, i2)] = fn(grid.node(i1), grid.node(i2));
      } else {
        throw Error(ErrorKind::invalid_argument, "2D sampling needs a binary function");
      }
    }
    return out;
  }

  const PeriodicGrid& grid() const { return grid_; }
  FieldKind kind() const { return kind_; }
  void set_kind(FieldKind kind) { kind_ = kind; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t i1, std::size_t i2) { return values_[grid_.index(i1, i2)]; }
  double at(std::size_t i1, std::size_t i2) const { return values_[grid_.index(i1, i2)]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& data() { return values_; }
  const std::vector<double>& data() const { return values_; }

  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double max() const { return *std::max_element(values_.begin(), values_.end()); }
  std::size_t argmin() const {
    return static_cast<std::size_t>(std::min_element(values_.begin(), values_.end()) -
                                    values_.begin());
  }
  std::size_t argmax() const {
    return static_cast<std::size_t>(std::max_element(values_.begin(), values_.end()) -
                                    values_.begin());
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  PeriodicField& operator+=(const PeriodicField& other) {
    require_same_grid(other);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
  }
  PeriodicField& operator-=(const PeriodicField& other) {
    require_same_grid(other);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
  }
  PeriodicField& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }
  PeriodicField& operator+=(double c) {
    for (double& v : values_) v += c;
    return *this;
  }

  void require_same_grid(const PeriodicField& other) const {
    if (grid_ != other.grid_) throw Error(ErrorKind::grid_mismatch, "fields live on different grids");
  }

 private:
  PeriodicGrid grid_;
  std::vector<double> values_;
  FieldKind kind_ = FieldKind::generic;
};

inline PeriodicField operator+(PeriodicField a, const PeriodicField& b) { return a += b; }
inline PeriodicField operator-(PeriodicField a, const PeriodicField& b) { return a -= b; }
inline PeriodicField operator*(PeriodicField a, double s) { return a *= s; }
inline PeriodicField operator*(double s, PeriodicField a) { return a *= s; }
inline PeriodicField operator+(PeriodicField a, double c) { return a += c; }

/// Pointwise product.
inline PeriodicField multiply(const PeriodicField& a, const PeriodicField& b) {
  a.require_same_grid(b);
  PeriodicField out(a.grid());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

/// Pointwise quotient.
inline PeriodicField divide(const PeriodicField& a, const PeriodicField& b) {
  a.require_same_grid(b);
  PeriodicField out(a.grid());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] / b[i];
  return out;
}

template <class Fn>
PeriodicField transform(const PeriodicField& a, Fn&& fn) {
  PeriodicField out(a.grid(), a.kind());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i]);
  return out;
}

/// Two-component vector field on a 2D grid.
struct VectorField2 {
  PeriodicField x1;
  PeriodicField x2;

  VectorField2() = default;
  explicit VectorField2(const PeriodicGrid& grid, FieldKind kind = FieldKind::generic)
      : x1(grid, kind), x2(grid, kind) {}
  VectorField2(PeriodicField a, PeriodicField b) : x1(std::move(a)), x2(std::move(b)) {
    x1.require_same_grid(x2);
  }

  const PeriodicGrid& grid() const { return x1.grid(); }
  PeriodicField& operator[](int axis) { return axis == 0 ? x1 : x2; }
  const PeriodicField& operator[](int axis) const { return axis == 0 ? x1 : x2; }

  VectorField2& operator+=(const VectorField2& o) {
    x1 += o.x1;
    x2 += o.x2;
    return *this;
  }
  VectorField2& operator*=(double s) {
    x1 *= s;
    x2 *= s;
    return *this;
  }
  bool all_finite() const { return x1.all_finite() && x2.all_finite(); }
};

inline VectorField2 operator+(VectorField2 a, const VectorField2& b) { return a += b; }
inline VectorField2 operator*(VectorField2 a, double s) { return a *= s; }

/// Scalar times vector, pointwise.
inline VectorField2 multiply(const PeriodicField& s, const VectorField2& v) {
  return VectorField2(multiply(s, v.x1), multiply(s, v.x2));
}

/// Relative position on the circle, always in [-pi, pi).
class WrappedDisplacement {
 public:
  constexpr WrappedDisplacement() = default;
  /// Wraps an arbitrary real onto [-pi, pi).
  static WrappedDisplacement wrap(double value) {
    double r = std::fmod(value + pi, two_pi);
    if (r < 0.0) r += two_pi;
    r -= pi;
    if (r >= pi) r -= two_pi;
    if (r < -pi) r = -pi;
    return WrappedDisplacement(r);
  }
  constexpr double value() const { return value_; }
  constexpr operator double() const { return value_; }

 private:
  constexpr explicit WrappedDisplacement(double v) : value_(v) {}
  double value_ = 0.0;
};

/// (x - y + pi) mod 2pi - pi.
inline WrappedDisplacement wrap_displacement(double x, double y) {
  return WrappedDisplacement::wrap(x - y);
}

/// Wraps a position onto [-pi, pi).
inline double wrap_position(double x) { return WrappedDisplacement::wrap(x).value(); }

/// Midpoint-rule integral over one period.
inline double integrate(const PeriodicField& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += v;
  return sum * f.grid().cell_volume();
}

inline double l2_norm_squared(const PeriodicField& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += v * v;
  return sum * f.grid().cell_volume();
}

inline double l2_norm(const PeriodicField& f) { return std::sqrt(l2_norm_squared(f)); }

inline double l2_norm_squared(const VectorField2& v) {
  return l2_norm_squared(v.x1) + l2_norm_squared(v.x2);
}

inline double linf_norm(const PeriodicField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

inline double l1_norm(const PeriodicField& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += std::abs(v);
  return sum * f.grid().cell_volume();
}

/// ||a - b||_2 / ||b||_2.
inline double relative_l2_error(const PeriodicField& a, const PeriodicField& b) {
  return l2_norm(a - b) / l2_norm(b);
}

/// Central finite difference with periodic wraparound, second-order accurate.
/// order = 1 uses (f[i+1] - f[i-1]) / 2dx, order = 2 uses the compact
/// three-point stencil. axis selects the coordinate in 2D.
inline PeriodicField derivative(const PeriodicField& f, int order = 1, int axis = 0) {
  const PeriodicGrid& g = f.grid();
  if (g.n() < 4) throw Error(ErrorKind::invalid_argument, "derivative needs n >= 4");
  if (order != 1 && order != 2) throw Error(ErrorKind::invalid_argument, "order must be 1 or 2");
  if (axis < 0 || axis >= g.dim()) throw Error(ErrorKind::invalid_argument, "axis out of range");

  const std::size_t n = g.n();
  const double dx = g.dx();
  const double c1 = 1.0 / (2.0 * dx);
  const double c2 = 1.0 / (dx * dx);
  PeriodicField out(g);
  const auto& v = f.data();
  auto& o = out.data();

  auto line = [&](std::size_t base, std::size_t stride) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ip = base + ((i + 1 == n) ? 0 : i + 1) * stride;
      const std::size_t im = base + ((i == 0) ? n - 1 : i - 1) * stride;
      const std::size_t ic = base + i * stride;
      o[ic] = order == 1 ? (v[ip] - v[im]) * c1 : (v[ip] - 2.0 * v[ic] + v[im]) * c2;
    }
  };

  if (g.dim() == 1) {
    line(0, 1);
  } else if (axis == 0) {
    for (std::size_t i2 = 0; i2 < n; ++i2) line(i2 * n, 1);
  } else {
    for (std::size_t i1 = 0; i1 < n; ++i1) line(i1, n);
  }
  return out;
}

inline VectorField2 gradient(const PeriodicField& f) {
  return VectorField2(derivative(f, 1, 0), derivative(f, 1, 1));
}

/// Central-difference divergence. In 1D the "vector" is the scalar flux.
inline PeriodicField divergence(const PeriodicField& flux) { return derivative(flux, 1, 0); }

inline PeriodicField divergence(const VectorField2& flux) {
  return derivative(flux.x1, 1, 0) + derivative(flux.x2, 1, 1);
}

inline PeriodicField laplacian(const PeriodicField& f) {
  if (f.grid().dim() == 1) return derivative(f, 2, 0);
  return derivative(f, 2, 0) + derivative(f, 2, 1);
}

/// Cumulative midpoint sum F[i] = anchor + sum_{j<i} f[j] dx + f[i] dx / 2.
///
/// On the circle F is periodic only when f integrates to zero; otherwise a
/// NonPeriodicAntiderivative diagnostic is recorded and the ramp is kept.
inline PeriodicField antiderivative(const PeriodicField& f, double anchor = 0.0,
                                    Diagnostics* diag = nullptr) {
  const PeriodicGrid& g = f.grid();
  if (g.dim() != 1) throw Error(ErrorKind::invalid_argument, "antiderivative is one-dimensional");
  const double dx = g.dx();
  const double mean_integral = integrate(f);
  if (std::abs(mean_integral) > 1e-8 * l2_norm(f))
    note(diag, DiagnosticKind::non_periodic_antiderivative,
         "integrand has nonzero integral " + std::to_string(mean_integral));

  PeriodicField out(g);
  double running = anchor;
  for (std::size_t i = 0; i < g.n(); ++i) {
    out[i] = running + 0.5 * f[i] * dx;
    running += f[i] * dx;
  }
  return out;
}

/// Linear interpolation of a 1D field at an arbitrary position on the circle.
inline double interpolate(const PeriodicField& f, double x) {
  const PeriodicGrid& g = f.grid();
  const double s = (wrap_position(x) + pi) / g.dx() - 0.5;
  const double fl = std::floor(s);
  const double frac = s - fl;
  const std::size_t i0 = g.wrap_index(static_cast<long long>(fl));
  const std::size_t i1 = (i0 + 1 == g.n()) ? 0 : i0 + 1;
  return (1.0 - frac) * f[i0] + frac * f[i1];
}

}  // namespace lfdc
