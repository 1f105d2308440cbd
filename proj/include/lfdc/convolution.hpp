#pragma once

#include <cstddef>

#include "lfdc/grid.hpp"
#include "lfdc/spectral.hpp"

namespace lfdc {

// Convolutions take the kernel as samples on the displacement lattice:
// entry m (per axis) holds f(wrap(m * dx)). Because cell centers are
// uniformly spaced, x_i - x_j = (i - j) dx, so
//   (f * g)_i = sum_j f(wrap(x_i - x_j)) g_j dx = sum_j f[(i - j) mod n] g_j dx,
// which is a circulant product.

/// Direct O(N^2) circular convolution.
inline PeriodicField circular_convolve_direct(const PeriodicField& f, const PeriodicField& g) {
  f.require_same_grid(g);
  const PeriodicGrid& grid = g.grid();
  const std::size_t n = grid.n();
  const double cell = grid.cell_volume();
  PeriodicField out(grid);
  if (grid.dim() == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) sum += f[(i + n - j) % n] * g[j];
      out[i] = sum * cell;
    }
    return out;
  }
  for (std::size_t i2 = 0; i2 < n; ++i2)
    for (std::size_t i1 = 0; i1 < n; ++i1) {
      double sum = 0.0;
      for (std::size_t j2 = 0; j2 < n; ++j2) {
        const std::size_t m2 = (i2 + n - j2) % n;
        for (std::size_t j1 = 0; j1 < n; ++j1)
          sum += f.at((i1 + n - j1) % n, m2) * g.at(j1, j2);
      }
      out.at(i1, i2) = sum * cell;
    }
  return out;
}

/// Circular convolution given the kernel's precomputed spectrum.
inline PeriodicField circular_convolve(const SpectralField& f_hat, const PeriodicField& g) {
  if (f_hat.grid != g.grid()) throw Error(ErrorKind::grid_mismatch, "kernel and field grids differ");
  SpectralField g_hat = spectral_transform(g);
  const double cell = g.grid().cell_volume();
  for (std::size_t k = 0; k < g_hat.size(); ++k) g_hat[k] *= f_hat[k] * cell;
  return inverse_spectral_transform(g_hat);
}

/// Spectral O(N log N) circular convolution; agrees with the direct sum to
/// round-off.
inline PeriodicField circular_convolve(const PeriodicField& f, const PeriodicField& g) {
  f.require_same_grid(g);
  return circular_convolve(spectral_transform(f), g);
}

}  // namespace lfdc
