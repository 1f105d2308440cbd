#include <gtest/gtest.h>

#include <random>

#include "lfdc/convolution.hpp"
#include "lfdc/kernel.hpp"
#include "oracles.hpp"

using namespace lfdc;

TEST(Kernel1D, SpecValues) {
  const auto spec = KernelSpec::repulsive(pi);
  EXPECT_EQ(kernel_eval_1d(spec, WrappedDisplacement::wrap(0.0)), 0.0);
  const double expected = (std::exp(1.5) - std::exp(0.5)) / (std::exp(2.0) - 1.0);
  EXPECT_NEAR(expected, 0.44341, 5e-6);
  EXPECT_NEAR(kernel_eval_1d(spec, WrappedDisplacement::wrap(pi / 2)), expected, 1e-14);
  EXPECT_NEAR(repulsive_periodic(pi - 1e-12, pi), 0.0, 1e-11);
  EXPECT_NEAR(repulsive_periodic(-pi, pi), 0.0, 1e-14);
}

TEST(Kernel1D, ClosedFormMatchesOracleAndIsOdd) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-pi, pi);
  for (double L : {pi / 6, 0.5, 1.0, pi, 10.0})
    for (int k = 0; k < 200; ++k) {
      const double x = u(rng);
      ASSERT_NEAR(repulsive_periodic(x, L), oracle::kernel_1d(x, L), 1e-12);
      ASSERT_NEAR(repulsive_periodic(-x, L), -repulsive_periodic(x, L), 1e-15);
    }
  // Small L stays finite.
  EXPECT_TRUE(std::isfinite(repulsive_periodic(1.0, 0.01)));
}

TEST(Kernel1D, SeriesConvergesToClosedForm) {
  auto f_hat = [](double x) { return repulsive_free(x, pi); };
  EXPECT_DOUBLE_EQ(periodize_series(f_hat, 0.7, 0), repulsive_free(0.7, pi));
  EXPECT_NEAR(periodize_series(f_hat, pi / 2, 20), repulsive_periodic(pi / 2, pi), 1e-10);
  for (double x : {-3.0, -1.0, 0.3, 2.9})
    EXPECT_NEAR(periodize_series([](double y) { return repulsive_free(y, 1.0); }, x, 20), repulsive_periodic(x, 1.0),
                1e-10);
  // An even base function periodizes to an even function.
  auto even = [](double x) { return std::exp(-std::abs(x)); };
  EXPECT_NEAR(periodize_series(even, 1.3, 10), periodize_series(even, -1.3, 10), 1e-15);
}

TEST(Kernel1D, MultiComponentIsWeightedSum) {
  const KernelSpec spec({{1.0, pi}, {-0.5, 1.0}});
  const double x = 0.8;
  EXPECT_NEAR(kernel_eval_1d(spec, WrappedDisplacement::wrap(x)),
              oracle::kernel_1d(x, pi) - 0.5 * oracle::kernel_1d(x, 1.0), 1e-13);
  EXPECT_FALSE(spec.is_single_repulsive());
  EXPECT_THROW(KernelSpec(std::vector<KernelComponent>{}), Error);
  EXPECT_THROW(KernelSpec::repulsive(-1.0), Error);
}

TEST(Kernel2D, OriginAntisymmetryAndTruncation) {
  const auto spec = KernelSpec::repulsive(pi, 2);
  const auto z = kernel_eval_2d(spec, 0.0, 0.0);
  EXPECT_EQ(z[0], 0.0);
  EXPECT_EQ(z[1], 0.0);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-pi, pi);
  for (int k = 0; k < 100; ++k) {
    const double a = u(rng), b = u(rng);
    const auto p = kernel_eval_2d(spec, a, b), m = kernel_eval_2d(spec, -a, -b);
    ASSERT_NEAR(p[0] + m[0], 0.0, 1e-14);
    ASSERT_NEAR(p[1] + m[1], 0.0, 1e-14);
  }
  const auto k8 = kernel_eval_2d(spec, 1.0, 1.0, 8), k12 = kernel_eval_2d(spec, 1.0, 1.0, 12);
  EXPECT_LT(std::abs(k8[0] - k12[0]), 1e-6);
  EXPECT_LT(std::abs(k8[1] - k12[1]), 1e-6);
  // Truncation too short for a long kernel fails the construction self-check.
  EXPECT_THROW(KernelTable(KernelSpec::repulsive(20.0, 2, 1), PeriodicGrid::square(16)), Error);
}

TEST(KernelTable, CacheReturnsSharedInstance) {
  const auto g = PeriodicGrid::line(128);
  const auto a = shared_kernel_table(KernelSpec::repulsive(pi), g);
  const auto b = shared_kernel_table(KernelSpec::repulsive(pi), g);
  EXPECT_EQ(a.get(), b.get());
  EXPECT_NE(a.get(), shared_kernel_table(KernelSpec::repulsive(1.0), g).get());
  EXPECT_THROW(KernelTable(KernelSpec::repulsive(pi, 2), g), Error);
}

TEST(Convolution, FftMatchesDirectSumOracle) {
  const auto g = PeriodicGrid::line(256);
  const auto rho = oracle::smooth_density(g, 11, 6);
  const auto table = shared_kernel_table(KernelSpec::repulsive(1.3), g);
  const auto fast = convolve(*table, rho);
  const auto ref = oracle::direct_convolution(g, std::vector<double>(rho.values().begin(), rho.values().end()), [](double d) { return oracle::kernel_1d(d, 1.3); });
  for (std::size_t i = 0; i < g.n(); ++i) ASSERT_NEAR(fast[i], ref[i], 1e-12);
  EXPECT_LT(linf_norm(circular_convolve_direct(table->samples(), rho) - fast), 1e-12);
}

TEST(Convolution, OddKernelAgainstConstantIsZero) {
  const auto g = PeriodicGrid::line(500);
  const auto table = shared_kernel_table(KernelSpec::repulsive(pi), g);
  EXPECT_LT(linf_norm(convolve(*table, PeriodicField::constant(g, 0.3))), 1e-14);
  const auto g2 = PeriodicGrid::square(32);
  const auto t2 = shared_kernel_table(KernelSpec::repulsive(pi, 2), g2);
  const auto v = convolve_2d(*t2, PeriodicField::constant(g2, 0.3));
  EXPECT_LT(linf_norm(v.x1) + linf_norm(v.x2), 1e-13);
}

TEST(Convolution, ImpulseReproducesShiftedKernel) {
  const auto g = PeriodicGrid::line(500);
  const std::size_t j = 137;
  const double M = 0.4;
  PeriodicField rho(g);
  rho[j] = M / g.dx();
  const auto v = convolve(*shared_kernel_table(KernelSpec::repulsive(pi), g), rho);
  for (std::size_t i = 0; i < g.n(); ++i) {
    if (i == j) continue;
    ASSERT_NEAR(v[i], M * oracle::kernel_1d(oracle::wrap(g.node(i) - g.node(j)), pi), 1e-12);
  }
}

TEST(Convolution, CommutesForEvenFields) {
  const auto g = PeriodicGrid::line(200);
  const auto f = PeriodicField::sample(g, [](double x) { return std::exp(std::cos(x)); });
  const auto h = PeriodicField::sample(g, [](double x) { return 1.0 + std::cos(2 * x); });
  EXPECT_LT(linf_norm(circular_convolve(f, h) - circular_convolve(h, f)), 1e-12);
}

TEST(Convolution, TwoDimensionalFftMatchesDirect) {
  const auto g = PeriodicGrid::square(16);
  const auto rho = oracle::smooth_density(g, 4, 3);
  const auto table = shared_kernel_table(KernelSpec::repulsive(pi, 2), g);
  const auto v = convolve_2d(*table, rho);
  EXPECT_LT(linf_norm(v.x1 - circular_convolve_direct(table->samples(0), rho)), 1e-12);
  EXPECT_LT(linf_norm(v.x2 - circular_convolve_direct(table->samples(1), rho)), 1e-12);
}
