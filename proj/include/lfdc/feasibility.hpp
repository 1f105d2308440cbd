#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lfdc/deconvolve.hpp"
#include "lfdc/error.hpp"
#include "lfdc/grid.hpp"
#include "lfdc/kernel.hpp"

namespace lfdc {

/// Von Mises density of total mass `mass` centered at mu.
inline PeriodicField von_mises_1d(const PeriodicGrid& grid, double kappa, double mu = 0.0,
                                  double mass = 1.0) {
  const double norm = mass / (two_pi * std::cyl_bessel_i(0.0, kappa));
  return PeriodicField::sample(
      grid, [&](double x) { return norm * std::exp(kappa * std::cos(x - mu)); }, FieldKind::density);
}

/// Product of two von Mises factors on the torus, total mass `mass`.
inline PeriodicField von_mises_2d(const PeriodicGrid& grid, double k1, double k2, double mu1 = 0.0,
                                  double mu2 = 0.0, double mass = 1.0) {
  const double norm =
      mass / (two_pi * two_pi * std::cyl_bessel_i(0.0, k1) * std::cyl_bessel_i(0.0, k2));
  return PeriodicField::sample(
      grid,
      [&](double x1, double x2) {
        return norm * std::exp(k1 * std::cos(x1 - mu1) + k2 * std::cos(x2 - mu2));
      },
      FieldKind::density);
}

/// Desired followers' density together with the model parameters it is
/// posed against.
class TargetSpec {
 public:
  TargetSpec(PeriodicField rho_F_target, double M_F, double D, KernelSpec kernel)
      : rho_F_(std::move(rho_F_target)), M_F_(M_F), D_(D), kernel_(std::move(kernel)) {
    if (!(M_F_ > 0.0 && M_F_ < 1.0)) throw Error(ErrorKind::invalid_argument, "M_F must lie in (0, 1)");
    if (!(D_ >= 0.0)) throw Error(ErrorKind::invalid_argument, "D must be nonnegative");
    if (kernel_.dim() != rho_F_.grid().dim())
      throw Error(ErrorKind::grid_mismatch, "kernel and target dimensions differ");
    if (!(rho_F_.min() > 0.0))
      throw Error(ErrorKind::non_positive_target,
                  "target density has minimum " + std::to_string(rho_F_.min()));
    const double mass = integrate(rho_F_);
    if (std::abs(mass - M_F_) > 1e-8)
      throw Error(ErrorKind::mass_mismatch, "target integrates to " + std::to_string(mass) +
                                                " but M_F = " + std::to_string(M_F_));
    rho_F_.set_kind(FieldKind::density);
  }

  const PeriodicField& rho_F() const { return rho_F_; }
  const PeriodicGrid& grid() const { return rho_F_.grid(); }
  double M_F() const { return M_F_; }
  double M_L() const { return 1.0 - M_F_; }
  double D() const { return D_; }
  const KernelSpec& kernel() const { return kernel_; }

 private:
  PeriodicField rho_F_;
  double M_F_;
  double D_;
  KernelSpec kernel_;
};

namespace detail {
inline void require_positive(const PeriodicField& rho) {
  if (!(rho.min() > 0.0))
    throw Error(ErrorKind::non_positive_target,
                "density has minimum " + std::to_string(rho.min()));
}
}  // namespace detail

/// v = D rho_x / rho on a 1D target.
inline PeriodicField desired_velocity(const PeriodicField& rho_F, double D) {
  detail::require_positive(rho_F);
  PeriodicField v = divide(derivative(rho_F), rho_F) * D;
  v.set_kind(FieldKind::velocity);
  return v;
}

inline PeriodicField desired_velocity(const TargetSpec& target) {
  return desired_velocity(target.rho_F(), target.D());
}

/// v = D grad(rho) / rho on a 2D target.
inline VectorField2 desired_velocity_2d(const PeriodicField& rho_F, double D) {
  detail::require_positive(rho_F);
  VectorField2 v(divide(derivative(rho_F, 1, 0), rho_F) * D, divide(derivative(rho_F, 1, 1), rho_F) * D);
  v.x1.set_kind(FieldKind::velocity);
  v.x2.set_kind(FieldKind::velocity);
  return v;
}

inline VectorField2 desired_velocity_2d(const TargetSpec& target) {
  return desired_velocity_2d(target.rho_F(), target.D());
}

struct FeasibilityReport {
  int dim = 1;
  double M_L = 0.0;
  // 1D analysis fields; absent in 2D.
  std::optional<PeriodicField> g1{};
  std::optional<PeriodicField> g2{};
  double C = 0.0;
  std::optional<PeriodicField> h{};
  double M_hat_L = 0.0;
  bool feasible = false;
  double stability_margin = 0.0;
  // v_FL_bar holds the x1 component in 2D; v_FL_bar_x2 the second one.
  PeriodicField v_FL_bar;
  std::optional<PeriodicField> v_FL_bar_x2{};
  PeriodicField rho_L_bar;
  double B = 0.0;  // 1D integration constant
  double A = 0.0;  // 2D constant a1 + a2
  double a1 = 0.0;
  double a2 = 0.0;
  bool closed_form = false;
};

/// Steady-state feasibility analysis of a 1D target. The single unit-weight repulsive kernel uses
/// the closed form
///   h   = -pi D g1 + (pi D / L^2) g2 - D C / (2 L^2),
///   rho = (D/2) g1 - (D / 2L^2) g2 + (M_L + D C / (2 L^2)) / 2pi,
/// with g2 = log(rho_hat), g1 = g2_xx, C = int g2. Other kernels deconvolve v
/// spectrally; h is then M_L - 2pi rho_L_bar, which agrees with the closed
/// form identity rho_L_bar = (M_L - h) / 2pi.
inline FeasibilityReport feasibility_1d(const TargetSpec& target, Diagnostics* diag = nullptr) {
  if (target.grid().dim() != 1) throw Error(ErrorKind::invalid_argument, "feasibility_1d needs a 1D target");
  const double D = target.D();
  const double M_L = target.M_L();
  PeriodicField g2 = target.rho_F() * (1.0 / target.M_F());
  for (double& v : g2.data()) v = std::log(std::max(v, 1e-300));
  PeriodicField g1 = derivative(g2, 2);
  const double C = integrate(g2);

  FeasibilityReport r{.v_FL_bar = desired_velocity(target), .rho_L_bar = PeriodicField(target.grid())};
  r.dim = 1;
  r.M_L = M_L;
  r.C = C;
  r.stability_margin = 2.0 - linf_norm(g1);

  const KernelSpec& kernel = target.kernel();
  if (kernel.is_single_repulsive()) {
    const double L2 = kernel.length_scale() * kernel.length_scale();
    PeriodicField h = g1 * (-pi * D) + g2 * (pi * D / L2);
    h += -D * C / (2.0 * L2);
    r.B = (M_L + D * C / (2.0 * L2)) / two_pi;
    PeriodicField rho = g1 * (0.5 * D) - g2 * (0.5 * D / L2);
    rho += r.B;
    r.M_hat_L = h.max();
    r.h = std::move(h);
    r.rho_L_bar = std::move(rho);
    r.closed_form = true;
  } else {
    auto table = shared_kernel_table(kernel, target.grid());
    PeriodicField H = deconvolve_spectral(r.v_FL_bar, *table, ZeroMeanRule{}, diag);
    PeriodicField h = H * (-two_pi);
    r.M_hat_L = h.max();
    r.B = M_L / two_pi;
    H += r.B;
    r.h = std::move(h);
    r.rho_L_bar = std::move(H);
  }
  r.rho_L_bar.set_kind(FieldKind::density);
  r.feasible = r.M_hat_L <= M_L && M_L < 1.0;
  r.g1 = std::move(g1);
  r.g2 = std::move(g2);
  return r;
}

/// Steady leader reference for a feasible 1D target.
inline PeriodicField reference_leader_density_1d(const TargetSpec& target, Diagnostics* diag = nullptr) {
  FeasibilityReport r = feasibility_1d(target, diag);
  if (r.rho_L_bar.min() < -1e-10)
    throw Error(ErrorKind::infeasible, "reference leader density has minimum " +
                                           std::to_string(r.rho_L_bar.min()) + "; need M_L >= " +
                                           std::to_string(r.M_hat_L));
  return r.rho_L_bar;
}

/// Feasibility analysis of a 2D target: H = deconvolution of v with zero mean,
/// a1 = -min H, a2 = (M_L - a1 |Omega|) / |Omega|, rho_L_bar = H + a1 + a2,
/// feasible iff a2 >= 0. M_hat_L = a1 |Omega| is the minimum leader mass.
inline FeasibilityReport feasibility_2d(const TargetSpec& target, Diagnostics* diag = nullptr) {
  if (target.grid().dim() != 2) throw Error(ErrorKind::invalid_argument, "feasibility_2d needs a 2D target");
  const double M_L = target.M_L();
  const double volume = target.grid().domain_volume();
  VectorField2 v = desired_velocity_2d(target);
  auto table = shared_kernel_table(target.kernel(), target.grid());
  PeriodicField H = deconvolve_2d(v, *table, ZeroMeanRule{}, diag);

  FeasibilityReport r{.v_FL_bar = v.x1, .rho_L_bar = H};
  r.dim = 2;
  r.M_L = M_L;
  r.v_FL_bar_x2 = v.x2;
  r.a1 = -H.min();
  r.a2 = (M_L - r.a1 * volume) / volume;
  r.A = r.a1 + r.a2;
  r.M_hat_L = r.a1 * volume;
  r.feasible = r.a2 >= 0.0;
  r.rho_L_bar += r.A;
  r.rho_L_bar.set_kind(FieldKind::density);
  PeriodicField lg = target.rho_F();
  for (double& x : lg.data()) x = std::log(std::max(x, 1e-300));
  r.stability_margin = 2.0 - linf_norm(laplacian(lg));
  return r;
}

inline PeriodicField reference_leader_density_2d(const TargetSpec& target, Diagnostics* diag = nullptr) {
  FeasibilityReport r = feasibility_2d(target, diag);
  if (!r.feasible)
    throw Error(ErrorKind::infeasible_2d, "no constant A keeps the leader density nonnegative (a2 = " +
                                              std::to_string(r.a2) + ")");
  return r.rho_L_bar;
}

/// One point of a feasibility map.
struct SweepPoint {
  double param1 = 0.0;
  double param2 = 0.0;
  double M_hat_L = 0.0;  // saturated at 1
  bool feasible = false;
};

/// Minimum leader mass for a von Mises target with concentration kappa,
/// diffusivity D and length scale L. Evaluated with M_F = 1/2 since M_hat_L
/// does not depend on M_F (rho_hat is normalized).
inline double von_mises_min_leader_mass(double kappa, double D, double L, std::size_t n = 500) {
  const auto grid = PeriodicGrid::line(n);
  TargetSpec target(von_mises_1d(grid, kappa, 0.0, 0.5), 0.5, D, KernelSpec::repulsive(L));
  return feasibility_1d(target).M_hat_L;
}

/// Grid of M_hat_L over two parameters of (kappa, D, L). `eval(p1, p2)` returns
/// the unsaturated M_hat_L; the point is feasible when some M_L < 1 admits a
/// solution, i.e. M_hat_L < 1.
template <class Eval>
std::vector<SweepPoint> feasibility_sweep(const std::vector<double>& p1, const std::vector<double>& p2,
                                          Eval&& eval) {
  std::vector<SweepPoint> out;
  out.reserve(p1.size() * p2.size());
  for (double a : p1)
    for (double b : p2) {
      const double m = eval(a, b);
      out.push_back({a, b, std::min(m, 1.0), m < 1.0});
    }
  return out;
}

}  // namespace lfdc
