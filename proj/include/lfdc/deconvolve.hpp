#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <variant>
#include <vector>

#include "lfdc/error.hpp"
#include "lfdc/grid.hpp"
#include "lfdc/kernel.hpp"
#include "lfdc/spectral.hpp"

namespace lfdc {

/// Fix the free additive constant so the result has integral `mass`.
struct MassRule {
  double mass = 0.0;
};
/// Fix the constant so the result integrates to zero.
struct ZeroMeanRule {};
/// Use the constant B as given.
struct ExplicitRule {
  double B = 0.0;
};
using ConstantRule = std::variant<MassRule, ZeroMeanRule, ExplicitRule>;

namespace detail {

inline void require_zero_mean(const PeriodicField& phi) {
  const double mean = integrate(phi);
  const double scale = l1_norm(phi);
  if (std::abs(mean) > 1e-6 * scale)
    throw Error(ErrorKind::non_zero_mean_input,
                "deconvolution input has integral " + std::to_string(mean));
}

// Additive constant that turns a field with integral `current` into one
// obeying the rule, given the rule's reference offset for ExplicitRule.
inline double rule_shift(const ConstantRule& rule, double current, double volume) {
  if (const auto* m = std::get_if<MassRule>(&rule)) return (m->mass - current) / volume;
  if (std::holds_alternative<ZeroMeanRule>(rule)) return -current / volume;
  return std::get<ExplicitRule>(rule).B;
}

}  // namespace detail

/// Inverts phi = f_L * rho for the single repulsive kernel of length scale L
/// through the ODE identity f'' - f / L^2 = 2 delta':
///   rho = 1/2 * antiderivative(phi_xx - phi / L^2) + B.
/// With ExplicitRule the antiderivative is anchored at zero and B is added.
inline PeriodicField deconvolve_1d(const PeriodicField& phi, double length_scale,
                                   const ConstantRule& rule, Diagnostics* diag = nullptr) {
  if (phi.grid().dim() != 1) throw Error(ErrorKind::invalid_argument, "deconvolve_1d needs a 1D field");
  if (!(length_scale > 0.0)) throw Error(ErrorKind::invalid_argument, "length scale must be positive");
  detail::require_zero_mean(phi);
  PeriodicField integrand = derivative(phi, 2);
  integrand -= phi * (1.0 / (length_scale * length_scale));
  PeriodicField rho = antiderivative(integrand, 0.0, diag) * 0.5;
  rho += detail::rule_shift(rule, integrate(rho), phi.grid().domain_volume());
  rho.set_kind(FieldKind::density);
  return rho;
}

/// Per-mode least-squares inversion of phi_a = f_a * rho, a = 1..components,
/// using the kernel spectra. The zero mode and any mode whose kernel energy
/// sum_a |F_a|^2 falls below 1e-14 of the maximum are not invertible: they are
/// zeroed (recorded as IllConditionedMode) and the zero mode is then set by
/// the rule. The rule's ExplicitRule B becomes the mean value of rho.
inline PeriodicField deconvolve_spectral(const std::vector<PeriodicField>& phi,
                                         const KernelTable& kernel, const ConstantRule& rule,
                                         Diagnostics* diag = nullptr) {
  if (static_cast<int>(phi.size()) != kernel.components())
    throw Error(ErrorKind::invalid_argument, "velocity components do not match kernel");
  const PeriodicGrid& grid = kernel.grid();
  std::vector<SpectralField> phi_hat;
  for (const auto& p : phi) {
    if (p.grid() != grid) throw Error(ErrorKind::grid_mismatch, "velocity and kernel grids differ");
    detail::require_zero_mean(p);
    phi_hat.push_back(spectral_transform(p));
  }
  const double cell = grid.cell_volume();
  const std::size_t total = grid.size();

  std::vector<double> energy(total, 0.0);
  double max_energy = 0.0;
  for (std::size_t k = 0; k < total; ++k) {
    for (int a = 0; a < kernel.components(); ++a) energy[k] += std::norm(kernel.spectrum(a)[k] * cell);
    max_energy = std::max(max_energy, energy[k]);
  }

  SpectralField rho_hat{grid, std::vector<std::complex<double>>(total)};
  std::size_t skipped = 0;
  for (std::size_t k = 0; k < total; ++k) {
    if (energy[k] < 1e-14 * max_energy || energy[k] == 0.0) {
      ++skipped;
      continue;
    }
    std::complex<double> num{0.0, 0.0};
    for (int a = 0; a < kernel.components(); ++a)
      num += std::conj(kernel.spectrum(a)[k] * cell) * phi_hat[static_cast<std::size_t>(a)][k];
    rho_hat[k] = num / energy[k];
  }
  note(diag, DiagnosticKind::ill_conditioned_mode,
       std::to_string(skipped) + " non-invertible modes zeroed", skipped);

  PeriodicField rho = inverse_spectral_transform(rho_hat);
  const double volume = grid.domain_volume();
  rho += detail::rule_shift(rule, integrate(rho), volume);
  rho.set_kind(FieldKind::density);
  return rho;
}

/// 1D spectral deconvolution (any number of kernel components).
inline PeriodicField deconvolve_spectral(const PeriodicField& phi, const KernelTable& kernel,
                                         const ConstantRule& rule, Diagnostics* diag = nullptr) {
  return deconvolve_spectral(std::vector<PeriodicField>{phi}, kernel, rule, diag);
}

/// 2D deconvolution of a vector velocity field.
inline PeriodicField deconvolve_2d(const VectorField2& phi, const KernelTable& kernel,
                                   const ConstantRule& rule, Diagnostics* diag = nullptr) {
  return deconvolve_spectral(std::vector<PeriodicField>{phi.x1, phi.x2}, kernel, rule, diag);
}

}  // namespace lfdc
