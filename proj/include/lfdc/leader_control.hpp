#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>

#include "lfdc/error.hpp"
#include "lfdc/grid.hpp"
#include "lfdc/spectral.hpp"

namespace lfdc {

/// Right-hand side of the leader flux law div(rho_L u) = rhs.
///   regulation: rhs = -K_L (ref - rho_L)
///   tracking:   rhs = -ref_dt - K_L (ref - rho_L)
/// Pass ref_dt = nullptr for regulation. Both densities must carry the same
/// mass so rhs integrates to zero.
inline PeriodicField leader_flux_rhs(const PeriodicField& rho_L, const PeriodicField& reference,
                                     const PeriodicField* reference_dt, double K_L) {
  if (!(K_L > 0.0)) throw Error(ErrorKind::invalid_argument, "K_L must be positive");
  rho_L.require_same_grid(reference);
  const double m_ref = integrate(reference);
  const double m_rho = integrate(rho_L);
  if (std::abs(m_ref - m_rho) > 1e-6)
    throw Error(ErrorKind::mass_mismatch, "reference mass " + std::to_string(m_ref) +
                                              " differs from leader mass " + std::to_string(m_rho));
  PeriodicField rhs = (reference - rho_L) * (-K_L);
  if (reference_dt != nullptr) rhs -= *reference_dt;
  return rhs;
}

/// Additive constant of the integrated flux. The flux law fixes rho_L u only
/// up to a constant c.
///   first_cell: F = antiderivative(rhs) with anchor 0.
///   minimum_energy: c minimizes int (F + c)^2 / rho_L, the kinetic energy
///   of the leaders, i.e. c = -int(F / rho) / int(1 / rho).
enum class FluxGauge { first_cell, minimum_energy };

inline const char* to_string(FluxGauge g) {
  return g == FluxGauge::first_cell ? "first_cell" : "minimum_energy";
}

/// Default floor for divisions by the leader density.
inline double default_density_floor(double M_L, double volume = two_pi) { return 1e-6 * M_L / volume; }

struct LeaderControl1D {
  PeriodicField u;
  PeriodicField flux;
  std::size_t vacuum_cells = 0;
};

namespace detail {

inline PeriodicField floored(const PeriodicField& rho, double floor, std::size_t& vacuum) {
  PeriodicField out = rho;
  vacuum = 0;
  for (double& v : out.data())
    if (v < floor) {
      v = floor;
      ++vacuum;
    }
  return out;
}

inline double energy_gauge_shift(const PeriodicField& flux, const PeriodicField& rho_floored) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < flux.size(); ++i) {
    num += flux[i] / rho_floored[i];
    den += 1.0 / rho_floored[i];
  }
  return -num / den;
}

}  // namespace detail

/// u = F / max(rho_L, floor) with F the integrated flux. Cells below the
/// floor are reported as VacuumRegion.
inline LeaderControl1D recover_u_1d(const PeriodicField& rho_L, const PeriodicField& flux_rhs,
                                    double floor, FluxGauge gauge = FluxGauge::first_cell,
                                    Diagnostics* diag = nullptr) {
  rho_L.require_same_grid(flux_rhs);
  if (rho_L.grid().dim() != 1) throw Error(ErrorKind::invalid_argument, "recover_u_1d needs 1D fields");
  // Round-off leaves rhs with a tiny integral; integrate its zero-mean part so
  // the flux closes on the circle.
  const double total = integrate(flux_rhs);
  if (std::abs(total) > 1e-8)
    note(diag, DiagnosticKind::non_periodic_antiderivative,
         "flux right-hand side has integral " + std::to_string(total));
  PeriodicField rhs = flux_rhs;
  rhs += -total / rho_L.grid().domain_volume();
  LeaderControl1D out{antiderivative(rhs), PeriodicField(rho_L.grid()), 0};
  PeriodicField rho_f = detail::floored(rho_L, floor, out.vacuum_cells);
  if (gauge == FluxGauge::minimum_energy) out.u += detail::energy_gauge_shift(out.u, rho_f);
  out.flux = out.u;
  out.u = divide(out.flux, rho_f);
  out.u.set_kind(FieldKind::velocity);
  if (out.vacuum_cells > 0)
    note(diag, DiagnosticKind::vacuum_region,
         std::to_string(out.vacuum_cells) + " cells below the leader density floor");
  return out;
}

struct LeaderControl2D {
  VectorField2 u;
  VectorField2 flux;
  std::size_t vacuum_cells = 0;
};

/// Curl-free flux w = grad(psi) with div(w) = rhs, solved spectrally. The
/// symbol uses the central-difference eigenvalues s_j = sin(k_j dx) / dx, so
/// the central-difference divergence of w reproduces rhs on every mode that
/// the stencil can see. Modes with s_1 = s_2 = 0 are set to zero.
inline VectorField2 solve_curl_free_flux(const PeriodicField& rhs) {
  const PeriodicGrid& g = rhs.grid();
  if (g.dim() != 2) throw Error(ErrorKind::invalid_argument, "solve_curl_free_flux needs a 2D field");
  const std::size_t n = g.n();
  const double dx = g.dx();
  SpectralField r_hat = spectral_transform(rhs);
  SpectralField w1{g, std::vector<std::complex<double>>(g.size())};
  SpectralField w2{g, std::vector<std::complex<double>>(g.size())};
  std::vector<double> s(n);
  for (std::size_t m = 0; m < n; ++m) s[m] = std::sin(two_pi * static_cast<double>(m) / static_cast<double>(n)) / dx;
  const std::complex<double> I{0.0, 1.0};
  for (std::size_t m2 = 0; m2 < n; ++m2)
    for (std::size_t m1 = 0; m1 < n; ++m1) {
      const double denom = s[m1] * s[m1] + s[m2] * s[m2];
      if (denom < 1e-12 / (dx * dx)) continue;
      const std::size_t k = g.index(m1, m2);
      const std::complex<double> psi = -r_hat[k] / denom;
      w1[k] = I * s[m1] * psi;
      w2[k] = I * s[m2] * psi;
    }
  return VectorField2(inverse_spectral_transform(w1), inverse_spectral_transform(w2));
}

inline LeaderControl2D recover_u_2d(const PeriodicField& rho_L, const PeriodicField& flux_rhs, double floor,
                                    FluxGauge gauge = FluxGauge::first_cell, Diagnostics* diag = nullptr) {
  rho_L.require_same_grid(flux_rhs);
  if (rho_L.grid().dim() != 2) throw Error(ErrorKind::invalid_argument, "recover_u_2d needs 2D fields");
  const double total = integrate(flux_rhs);
  if (std::abs(total) > 1e-8)
    note(diag, DiagnosticKind::non_periodic_antiderivative,
         "flux right-hand side has integral " + std::to_string(total));
  LeaderControl2D out{VectorField2(rho_L.grid()), solve_curl_free_flux(flux_rhs), 0};
  PeriodicField rho_f = detail::floored(rho_L, floor, out.vacuum_cells);
  if (gauge == FluxGauge::minimum_energy) {
    out.flux.x1 += detail::energy_gauge_shift(out.flux.x1, rho_f);
    out.flux.x2 += detail::energy_gauge_shift(out.flux.x2, rho_f);
  }
  out.u = VectorField2(divide(out.flux.x1, rho_f), divide(out.flux.x2, rho_f));
  out.u.x1.set_kind(FieldKind::velocity);
  out.u.x2.set_kind(FieldKind::velocity);
  if (out.vacuum_cells > 0)
    note(diag, DiagnosticKind::vacuum_region,
         std::to_string(out.vacuum_cells) + " cells below the leader density floor");
  return out;
}

}  // namespace lfdc
