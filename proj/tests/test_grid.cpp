#include <gtest/gtest.h>

#include <random>

#include "lfdc/grid.hpp"
#include "lfdc/spectral.hpp"
#include "oracles.hpp"

using namespace lfdc;

TEST(Wrap, SpecValues) {
  EXPECT_DOUBLE_EQ(wrap_displacement(0.0, 0.0).value(), 0.0);
  EXPECT_NEAR(wrap_displacement(pi - 0.1, -pi + 0.1).value(), -0.2, 1e-14);
  EXPECT_DOUBLE_EQ(wrap_displacement(1.0, 0.5).value(), 0.5);
}

TEST(Wrap, RangeAndAgreementWithFloorFormula) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int k = 0; k < 10000; ++k) {
    const double x = u(rng);
    const double w = WrappedDisplacement::wrap(x).value();
    ASSERT_GE(w, -pi);
    ASSERT_LT(w, pi);
    ASSERT_NEAR(w, oracle::wrap(x), 1e-12);
  }
  EXPECT_DOUBLE_EQ(WrappedDisplacement::wrap(pi).value(), -pi);
}

TEST(Grid, NodesAreCellCenters) {
  const auto g = PeriodicGrid::line(500);
  EXPECT_DOUBLE_EQ(g.node(0), -pi + 0.5 * g.dx());
  EXPECT_NEAR(g.node(499), pi - 0.5 * g.dx(), 1e-14);
  EXPECT_THROW(PeriodicGrid(3, 10), Error);
}

TEST(Integrate, ConstantsHarmonicsAndVonMises) {
  const auto g = PeriodicGrid::line(500);
  EXPECT_NEAR(integrate(PeriodicField::constant(g, 0.3)), 2 * pi * 0.3, 1e-12);
  EXPECT_NEAR(integrate(PeriodicField::sample(g, [](double x) { return std::cos(x); })), 0.0, 1e-12);
  EXPECT_NEAR(integrate(PeriodicField::sample(g, [](double x) { return oracle::von_mises(x, 1.8); })), 1.0, 1e-10);
  const auto g2 = PeriodicGrid::square(40);
  EXPECT_NEAR(integrate(PeriodicField::constant(g2, 1.0)), 4 * pi * pi, 1e-10);
}

TEST(Derivative, CentralDifferenceBounds) {
  const auto g = PeriodicGrid::line(500);
  const auto s = PeriodicField::sample(g, [](double x) { return std::sin(x); });
  const auto ds = derivative(s);
  double err = 0.0;
  for (std::size_t i = 0; i < g.n(); ++i) err = std::max(err, std::abs(ds[i] - std::cos(g.node(i))));
  EXPECT_LE(err, g.dx() * g.dx() / 6.0);
  EXPECT_EQ(linf_norm(derivative(PeriodicField::constant(g, 2.5))), 0.0);
  const auto c = PeriodicField::sample(g, [](double x) { return std::cos(x); });
  const auto d2 = derivative(c, 2);
  double err2 = 0.0;
  for (std::size_t i = 0; i < g.n(); ++i) err2 = std::max(err2, std::abs(d2[i] + c[i]));
  EXPECT_LE(err2, g.dx() * g.dx() / 12.0 * 1.01);
}

TEST(Derivative, SecondAxisIn2D) {
  const auto g = PeriodicGrid::square(64);
  const auto f = PeriodicField::sample(g, [](double, double y) { return std::sin(2 * y); });
  const auto d = derivative(f, 1, 1);
  const auto d0 = derivative(f, 1, 0);
  double err = 0.0;
  for (std::size_t i2 = 0; i2 < g.n(); ++i2)
    for (std::size_t i1 = 0; i1 < g.n(); ++i1) err = std::max(err, std::abs(d.at(i1, i2) - 2 * std::cos(2 * g.node(i2))));
  EXPECT_LT(err, 4.0 * 4 * g.dx() * g.dx() / 6.0 + 1e-12);
  EXPECT_LT(linf_norm(d0), 1e-12);
}

TEST(Antiderivative, SineFromCosine) {
  const auto g = PeriodicGrid::line(500);
  const auto c = PeriodicField::sample(g, [](double x) { return std::cos(x); });
  auto F = antiderivative(c);
  F += -integrate(F) / (2 * pi);
  double err = 0.0;
  for (std::size_t i = 0; i < g.n(); ++i) err = std::max(err, std::abs(F[i] - std::sin(g.node(i))));
  EXPECT_LT(err, g.dx() * g.dx());
  const auto zero = antiderivative(PeriodicField(g), 1.25);
  EXPECT_DOUBLE_EQ(zero.min(), 1.25);
  EXPECT_DOUBLE_EQ(zero.max(), 1.25);
}

TEST(Antiderivative, ClosesOnTheCircleForZeroMeanInput) {
  const auto g = PeriodicGrid::line(500);
  const auto f = PeriodicField::sample(g, [](double x) { return std::sin(3 * x) + 0.2 * std::cos(x); });
  Diagnostics diag;
  const auto F = antiderivative(f, 0.0, &diag);
  EXPECT_TRUE(diag.empty());
  // Stepping once more past the last cell lands back on F[0].
  const std::size_t n = g.n();
  EXPECT_NEAR(F[n - 1] + 0.5 * (f[n - 1] + f[0]) * g.dx(), F[0], 1e-12);
  antiderivative(PeriodicField::constant(g, 1.0), 0.0, &diag);
  EXPECT_EQ(diag.count(DiagnosticKind::non_periodic_antiderivative), 1u);
}

TEST(Interpolate, LinearBetweenNodesAndPeriodic) {
  const auto g = PeriodicGrid::line(100);
  const auto f = PeriodicField::sample(g, [](double x) { return std::sin(x); });
  EXPECT_NEAR(interpolate(f, g.node(10)), f[10], 1e-14);
  EXPECT_NEAR(interpolate(f, 0.5 * (g.node(10) + g.node(11))), 0.5 * (f[10] + f[11]), 1e-14);
  EXPECT_NEAR(interpolate(f, pi - 1e-9), 0.5 * (f[99] + f[0]), 1e-6);
}

TEST(Spectral, ConstantsHarmonicsAndRoundTrip) {
  const auto g = PeriodicGrid::line(64);
  const auto s = spectral_transform(PeriodicField::constant(g, 2.0));
  for (std::size_t k = 1; k < g.n(); ++k) EXPECT_LT(std::abs(s[k]), 1e-12);
  const auto c3 = spectral_transform(PeriodicField::sample(g, [](double x) { return std::cos(3 * x); }));
  for (std::size_t k = 0; k < g.n(); ++k) {
    const long long w = wavenumber(k, g.n());
    if (w == 3 || w == -3) EXPECT_NEAR(std::abs(c3[k]), 32.0, 1e-10);
    else EXPECT_LT(std::abs(c3[k]), 1e-10);
  }
  std::mt19937 rng(1);
  std::normal_distribution<double> nd;
  for (const auto& grid : {PeriodicGrid::line(500), PeriodicGrid::square(32)}) {
    PeriodicField f(grid);
    for (double& v : f.data()) v = nd(rng);
    const auto back = inverse_spectral_transform(spectral_transform(f));
    EXPECT_LT(linf_norm(back - f), 1e-12);
  }
}

TEST(Field, GridMismatchIsAnError) {
  PeriodicField a(PeriodicGrid::line(10)), b(PeriodicGrid::line(12));
  EXPECT_THROW(a += b, Error);
  try {
    a -= b;
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::grid_mismatch);
  }
}
