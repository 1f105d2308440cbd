#include <gtest/gtest.h>

#include "lfdc/deconvolve.hpp"
#include "lfdc/feasibility.hpp"
#include "lfdc/kernel.hpp"
#include "oracles.hpp"

using namespace lfdc;

namespace {
double rel(const PeriodicField& a, const PeriodicField& b) { return l2_norm(a - b) / l2_norm(b); }
}  // namespace

TEST(Deconvolve1D, ZeroInputGivesUniformWithMass) {
  const auto g = PeriodicGrid::line(500);
  const auto rho = deconvolve_1d(PeriodicField(g), pi, MassRule{0.4});
  EXPECT_NEAR(rho.min(), 0.4 / (2 * pi), 1e-15);
  EXPECT_NEAR(rho.max(), 0.4 / (2 * pi), 1e-15);
  const auto table = shared_kernel_table(KernelSpec::repulsive(pi), g);
  const auto rs = deconvolve_spectral(PeriodicField(g), *table, MassRule{0.4});
  EXPECT_NEAR(rs.max(), 0.4 / (2 * pi), 1e-15);
}

TEST(Deconvolve1D, RoundTripSmoothDensity) {
  const auto g = PeriodicGrid::line(500);
  const auto table = shared_kernel_table(KernelSpec::repulsive(pi), g);
  for (unsigned seed : {1u, 2u, 3u}) {
    const auto rho = oracle::smooth_density(g, seed, 4, 0.4);
    const auto phi = convolve(*table, rho);
    EXPECT_LT(rel(deconvolve_1d(phi, pi, MassRule{0.4}), rho), 1e-4) << seed;
    EXPECT_LT(rel(deconvolve_spectral(phi, *table, MassRule{0.4}), rho), 1e-10) << seed;
  }
}

TEST(Deconvolve1D, ReproducesSteadyLeaderFormula) {
  const auto g = PeriodicGrid::line(500);
  const double D = 0.05, kappa = 1.8, L = pi, M_L = 0.4;
  const auto target = von_mises_1d(g, kappa, 0.0, 0.6);
  const auto v = desired_velocity(target, D);
  const auto expected = PeriodicField::sample(g, [&](double x) { return oracle::reference_leader_density(x, D, kappa, L, M_L); });
  EXPECT_LT(rel(deconvolve_1d(v, L, MassRule{M_L}), expected), 1e-4);
}

TEST(Deconvolve1D, OdeAndSpectralRoutesConverge) {
  // The ODE route carries O(dx^2) truncation error; the two routes agree to
  // 1e-6 once the grid resolves it.
  for (std::size_t n : {500u, 4096u}) {
    const auto g = PeriodicGrid::line(n);
    const auto table = shared_kernel_table(KernelSpec::repulsive(pi), g);
    const auto v = desired_velocity(von_mises_1d(g, 1.8, 0.0, 0.6), 0.05);
    const auto a = deconvolve_1d(v, pi, MassRule{0.4});
    const auto b = deconvolve_spectral(v, *table, MassRule{0.4});
    const double err = linf_norm(a - b);
    if (n == 500) {
      EXPECT_LT(err, 1e-4);
    } else {
      EXPECT_LT(err, 1e-6);
    }
  }
}

TEST(Deconvolve1D, RulesFixTheConstant) {
  const auto g = PeriodicGrid::line(256);
  const auto phi = PeriodicField::sample(g, [](double x) { return std::sin(x); });
  const auto z = deconvolve_1d(phi, pi, ZeroMeanRule{});
  EXPECT_NEAR(integrate(z), 0.0, 1e-13);
  const auto m = deconvolve_1d(phi, pi, MassRule{2.0});
  EXPECT_NEAR(integrate(m), 2.0, 1e-12);
  EXPECT_LT(linf_norm(m - z - PeriodicField::constant(g, 2.0 / (2 * pi))), 1e-13);
  // Explicit rule: anchored antiderivative plus B.
  const auto e0 = deconvolve_1d(phi, pi, ExplicitRule{0.0});
  const auto e1 = deconvolve_1d(phi, pi, ExplicitRule{0.3});
  EXPECT_LT(linf_norm(e1 - e0 - PeriodicField::constant(g, 0.3)), 1e-14);
  // Spectral explicit rule sets the mean value.
  const auto table = shared_kernel_table(KernelSpec::repulsive(pi), g);
  const auto s = deconvolve_spectral(phi, *table, ExplicitRule{0.3});
  EXPECT_NEAR(integrate(s) / (2 * pi), 0.3, 1e-13);
}

TEST(Deconvolve1D, RejectsNonZeroMeanInput) {
  const auto g = PeriodicGrid::line(128);
  const auto phi = PeriodicField::sample(g, [](double x) { return 1.0 + std::sin(x); });
  try {
    deconvolve_1d(phi, pi, MassRule{1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::non_zero_mean_input);
  }
  const auto table = shared_kernel_table(KernelSpec::repulsive(pi), g);
  EXPECT_THROW(deconvolve_spectral(phi, *table, MassRule{1.0}), Error);
}

TEST(DeconvolveSpectral, MultiComponentKernelRoundTrip) {
  const auto g = PeriodicGrid::line(500);
  const KernelSpec spec({{1.0, pi}, {0.5, 1.0}});
  const auto table = shared_kernel_table(spec, g);
  const auto rho = oracle::smooth_density(g, 9, 5, 0.3);
  EXPECT_LT(rel(deconvolve_spectral(convolve(*table, rho), *table, MassRule{0.3}), rho), 1e-10);
}

TEST(Deconvolve2D, RoundTripAndZeroInput) {
  const auto g = PeriodicGrid::square(50);
  const auto table = shared_kernel_table(KernelSpec::repulsive(pi, 2), g);
  const auto rho = oracle::smooth_density(g, 21, 3, 0.4);
  Diagnostics diag;
  const auto back = deconvolve_2d(convolve_2d(*table, rho), *table, MassRule{0.4}, &diag);
  EXPECT_LT(rel(back, rho), 1e-3);
  // The zero mode is never invertible and is reported.
  EXPECT_GE(diag.count(DiagnosticKind::ill_conditioned_mode), 1u);

  Diagnostics d0;
  const auto u = deconvolve_2d(VectorField2(g), *table, MassRule{0.4}, &d0);
  EXPECT_NEAR(u.min(), 0.4 / (4 * pi * pi), 1e-15);
  EXPECT_NEAR(u.max(), 0.4 / (4 * pi * pi), 1e-15);
  EXPECT_GE(d0.count(DiagnosticKind::ill_conditioned_mode), 1u);
}
