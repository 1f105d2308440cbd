#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "lfdc/error.hpp"
#include "lfdc/feasibility.hpp"
#include "lfdc/governor.hpp"
#include "lfdc/grid.hpp"
#include "lfdc/kernel.hpp"
#include "lfdc/leader_control.hpp"
#include "lfdc/metrics.hpp"
#include "lfdc/pde_sim.hpp"
#include "lfdc/spectral.hpp"

namespace lfdc {

struct AgentState {
  std::vector<double> leaders;
  std::vector<double> followers;
  std::uint64_t rng_seed = 0;
};

/// Wrapped-Gaussian kernel density estimate settings. bandwidth <= 0 selects
/// h = 1.06 sigma N^{-1/5} with the circular standard deviation
/// sigma = sqrt(-2 ln R), clamped to [2 dx, pi / 4].
struct KdeConfig {
  double bandwidth = -1.0;
};

/// Circular standard deviation sqrt(-2 ln |mean(e^{i x})|).
inline double circular_std(const std::vector<double>& positions) {
  double c = 0.0, s = 0.0;
  for (double x : positions) {
    c += std::cos(x);
    s += std::sin(x);
  }
  const double n = static_cast<double>(positions.size());
  const double R = std::hypot(c, s) / n;
  if (!(R > 0.0)) return std::numeric_limits<double>::infinity();
  return std::sqrt(-2.0 * std::log(std::min(R, 1.0)));
}

inline double kde_bandwidth(const std::vector<double>& positions, const KdeConfig& kde, const PeriodicGrid& grid) {
  if (kde.bandwidth > 0.0) return kde.bandwidth;
  const double sigma = circular_std(positions);
  const double h = 1.06 * sigma * std::pow(static_cast<double>(positions.size()), -0.2);
  return std::clamp(std::isfinite(h) ? h : pi / 4.0, 2.0 * grid.dx(), pi / 4.0);
}

/// rho(x) = (mass / N) sum_k sum_m phi_h(x - x_k + 2 pi m) sampled at cell
/// centers. Evaluated through the Fourier series of the wrapped Gaussian,
///   rho(x) = mass / 2pi sum_k exp(-k^2 h^2 / 2) c_k e^{i k x},
/// with c_k the empirical characteristic function. Modes are kept while the
/// Gaussian factor exceeds 1e-13 and folded onto the grid's DFT bins, which
/// reproduces the image sum at the nodes. Tiny negative round-off is clipped
/// and the result rescaled to integrate exactly to `mass`.
inline PeriodicField estimate_density(const std::vector<double>& positions, double mass, const KdeConfig& kde,
                                      const PeriodicGrid& grid) {
  if (grid.dim() != 1) throw Error(ErrorKind::invalid_argument, "estimate_density is one-dimensional");
  if (positions.size() < 2) throw Error(ErrorKind::too_few_agents, "density estimation needs at least 2 agents");
  const double h = kde_bandwidth(positions, kde, grid);
  const std::size_t n = grid.n();
  const auto kmax = static_cast<std::size_t>(std::ceil(std::sqrt(2.0 * std::log(1e13)) / h));

  // sums[k] = sum_j e^{-i k x_j}
  std::vector<std::complex<double>> sums(kmax + 1, {0.0, 0.0});
  for (double x : positions) {
    const std::complex<double> z = std::polar(1.0, -x);
    std::complex<double> p{1.0, 0.0};
    for (std::size_t k = 0; k <= kmax; ++k) {
      sums[k] += p;
      p *= z;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(positions.size());
  const double x0 = grid.node(0);
  SpectralField bins{grid, std::vector<std::complex<double>>(n, {0.0, 0.0})};
  for (std::size_t k = 0; k <= kmax; ++k) {
    const double kk = static_cast<double>(k);
    const double g = std::exp(-0.5 * kk * kk * h * h) * mass / two_pi * inv_n;
    const std::complex<double> c = g * sums[k] * std::polar(1.0, kk * x0);
    bins[k % n] += c;
    if (k > 0) bins[(n - k % n) % n] += std::conj(c);
  }
  // Backward transform without the 1/N factor gives sum_m bins[m] e^{2 pi i m i / n}.
  PeriodicField rho = inverse_spectral_transform(bins) * static_cast<double>(n);
  for (double& v : rho.data()) v = std::max(v, 0.0);
  rho *= mass / integrate(rho);
  rho.set_kind(FieldKind::density);
  return rho;
}

/// Drift sum_j f_L(x - a_j) for every x, by brute force.
inline std::vector<double> kernel_sum_direct(const std::vector<double>& sources, const std::vector<double>& targets,
                                             double length_scale) {
  std::vector<double> out(targets.size(), 0.0);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    double s = 0.0;
    for (double a : sources) s += repulsive_periodic(WrappedDisplacement::wrap(targets[k] - a).value(), length_scale);
    out[k] = s;
  }
  return out;
}

/// Same sum in O((N + M) log N). For positions in [-pi, pi) and delta = x - a,
/// f(delta) = c [e^{2pi/L} e^{-delta/L} - e^{delta/L}] when a < x and
/// f(delta) = c [e^{-delta/L} - e^{2pi/L} e^{delta/L}] when a > x, with
/// c = 1 / (e^{2pi/L} - 1). Prefix sums of e^{+-a/L} over the sorted sources
/// then give every target in one binary search.
inline std::vector<double> kernel_sum_fast(std::vector<double> sources, const std::vector<double>& targets,
                                           double length_scale) {
  std::sort(sources.begin(), sources.end());
  const std::size_t m = sources.size();
  const double L = length_scale;
  std::vector<double> sp(m + 1, 0.0), sm(m + 1, 0.0);  // prefix sums of e^{a/L}, e^{-a/L}
  for (std::size_t j = 0; j < m; ++j) {
    sp[j + 1] = sp[j] + std::exp(sources[j] / L);
    sm[j + 1] = sm[j] + std::exp(-sources[j] / L);
  }
  const double E = std::exp(two_pi / L);
  const double c = 1.0 / std::expm1(two_pi / L);
  std::vector<double> out(targets.size(), 0.0);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const double x = targets[k];
    const auto lo = static_cast<std::size_t>(std::lower_bound(sources.begin(), sources.end(), x) - sources.begin());
    const auto hi = static_cast<std::size_t>(std::upper_bound(sources.begin(), sources.end(), x) - sources.begin());
    const double sp_lo = sp[lo], sm_lo = sm[lo];
    const double sp_hi = sp[m] - sp[hi], sm_hi = sm[m] - sm[hi];
    const double ex = std::exp(x / L);
    out[k] = c * ((E * sp_lo + sp_hi) / ex - ex * (sm_lo + E * sm_hi));
  }
  return out;
}

/// Follower drift (1 / N_total) sum over leaders of the kernel, any kernel.
inline std::vector<double> follower_drift(const std::vector<double>& leaders, const std::vector<double>& followers,
                                          const KernelSpec& kernel, std::size_t n_total) {
  std::vector<double> drift(followers.size(), 0.0);
  for (const auto& comp : kernel.components()) {
    const std::vector<double> s = kernel_sum_fast(leaders, followers, comp.length_scale);
    for (std::size_t k = 0; k < drift.size(); ++k) drift[k] += comp.weight * s[k];
  }
  const double w = 1.0 / static_cast<double>(n_total);
  for (double& d : drift) d *= w;
  return drift;
}

/// Euler-Maruyama step: leaders follow u sampled by linear interpolation,
/// followers drift under the leaders' kernel plus sqrt(2 D dt) noise.
template <class Rng>
void step_agents(AgentState& state, const PeriodicField& u, const KernelSpec& kernel, double D, double dt, Rng& rng) {
  const std::size_t n_total = state.leaders.size() + state.followers.size();
  const std::vector<double> drift = follower_drift(state.leaders, state.followers, kernel, n_total);
  for (double& x : state.leaders) x = wrap_position(x + dt * interpolate(u, x));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sigma = std::sqrt(2.0 * D * dt);
  for (std::size_t k = 0; k < state.followers.size(); ++k) {
    const double noise = sigma > 0.0 ? sigma * normal(rng) : 0.0;
    state.followers[k] = wrap_position(state.followers[k] + dt * drift[k] + noise);
  }
}

struct DiscreteConfig {
  SimConfig sim;  // n, dt, n_steps, D, kernels, K_L, scheme, alpha, target, record_every
  std::size_t N_L = 400;
  std::size_t N_F = 600;
  KdeConfig kde{};
  std::size_t n_trials = 8;
  std::uint64_t master_seed = 1;
  std::size_t update_every = 1;  // control / estimation cadence in steps
  std::size_t threads = 0;       // 0 = hardware concurrency
  double steady_fraction = 0.1;
};

struct TrialResult {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::size_t N_L = 0;
  double steady_E_F = 0.0;
  double steady_KL_F = 0.0;
  std::vector<double> times, E_L, E_F, KL_F, alpha;
  double max_mass_error = 0.0;  // |int rho_est - N_i / N| over all estimates
  AgentState initial, final;
  std::optional<PeriodicField> rho_L_est, rho_F_est;
  bool completed = false;
  std::optional<Error> failure;
  Diagnostics diagnostics;
};

struct EnsembleResult {
  std::vector<TrialResult> trials;
  double mean_E_F = 0.0, std_E_F = 0.0;
  double mean_KL_F = 0.0, std_KL_F = 0.0;
  std::size_t failed = 0;
};

/// Per-trial seed from (master, trial) through seed_seq.
inline std::uint64_t trial_seed(std::uint64_t master, std::size_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(trial)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// One closed-loop agent trial: densities are estimated from positions, the
/// macroscopic controller runs on the estimates, and leaders sample u.
inline TrialResult run_trial(const DiscreteConfig& cfg, std::size_t trial) {
  TrialResult r;
  r.trial = trial;
  r.seed = trial_seed(cfg.master_seed, trial);
  r.N_L = cfg.N_L;
  std::mt19937_64 rng(r.seed);

  const SimConfig& sc = cfg.sim;
  const PeriodicGrid grid = sc.grid();
  const TargetSpec& target = *sc.target;
  const std::size_t N = cfg.N_L + cfg.N_F;
  const double M_L = static_cast<double>(cfg.N_L) / static_cast<double>(N);
  const double M_F = static_cast<double>(cfg.N_F) / static_cast<double>(N);
  const double floor = sc.leader_floor > 0.0 ? sc.leader_floor : default_density_floor(M_L);

  TargetSpec controller_target(target.rho_F(), target.M_F(), target.D(), sc.controller_kernel);
  const FeasibilityReport report = feasibility_1d(controller_target, &r.diagnostics);
  auto controller = shared_kernel_table(sc.controller_kernel, grid);
  std::optional<ReferenceGovernor> governor;
  if (sc.scheme == Scheme::reference_governor) governor.emplace(controller_target, report.rho_L_bar, sc.alpha, controller);

  std::uniform_real_distribution<double> uni(-pi, pi);
  r.initial.rng_seed = r.seed;
  r.initial.leaders.resize(cfg.N_L);
  r.initial.followers.resize(cfg.N_F);
  for (double& x : r.initial.leaders) x = uni(rng);
  for (double& x : r.initial.followers) x = uni(rng);
  AgentState state = r.initial;

  std::vector<double> e2_L, e2_F;
  PeriodicField u(grid, FieldKind::velocity);
  const double dt_control = sc.dt * static_cast<double>(cfg.update_every);
  try {
    for (std::size_t k = 0; k <= sc.n_steps; ++k) {
      const bool control_step = k % cfg.update_every == 0;
      const bool record = k % sc.record_every == 0 || k == sc.n_steps;
      if (!control_step && !record) {
        step_agents(state, u, sc.plant(), sc.D, sc.dt, rng);
        continue;
      }
      PeriodicField rho_L = estimate_density(state.leaders, M_L, cfg.kde, grid);
      PeriodicField rho_F = estimate_density(state.followers, M_F, cfg.kde, grid);
      r.max_mass_error = std::max({r.max_mass_error, std::abs(integrate(rho_L) - M_L), std::abs(integrate(rho_F) - M_F)});
      double alpha = 0.0;
      const PeriodicField* ref = &report.rho_L_bar;
      const PeriodicField* ref_dt = nullptr;
      if (control_step && governor) {
        const GovernorState& s = governor->step(rho_F, dt_control, &r.diagnostics);
        ref = &s.rho_hat_L;
        ref_dt = &s.rho_hat_L_dt;
        alpha = s.alpha;
      } else if (governor) {
        ref = &governor->state().rho_hat_L;
        alpha = governor->state().alpha;
      }
      if (record) {
        r.times.push_back(static_cast<double>(k) * sc.dt);
        e2_L.push_back(l2_norm_squared(*ref - rho_L));
        e2_F.push_back(l2_norm_squared(target.rho_F() - rho_F));
        r.KL_F.push_back(kl_divergence(target.rho_F(), rho_F, &r.diagnostics));
        r.alpha.push_back(alpha);
      }
      if (k == sc.n_steps) {
        r.rho_L_est = std::move(rho_L);
        r.rho_F_est = std::move(rho_F);
        break;
      }
      if (control_step) {
        const PeriodicField rhs = leader_flux_rhs(rho_L, *ref, ref_dt, sc.K_L);
        u = recover_u_1d(rho_L, rhs, floor, sc.gauge, &r.diagnostics).u;
      }
      step_agents(state, u, sc.plant(), sc.D, sc.dt, rng);
    }
    r.completed = true;
  } catch (const Error& e) {
    r.failure = e;
  }
  if (!e2_F.empty()) {
    r.E_L = percentage_error(e2_L);
    r.E_F = percentage_error(e2_F);
    r.steady_E_F = steady_value(r.E_F, cfg.steady_fraction);
    r.steady_KL_F = steady_value(r.KL_F, cfg.steady_fraction);
  }
  r.final = std::move(state);
  return r;
}

/// Independent trials, executed on a small thread pool. Each trial owns its
/// RNG stream, so results do not depend on the thread count.
inline EnsembleResult run_discrete(const DiscreteConfig& cfg) {
  const SimConfig& sc = cfg.sim;
  if (sc.dim != 1) throw Error(ErrorKind::invalid_argument, "agent simulation is one-dimensional");
  if (!sc.target) throw Error(ErrorKind::invalid_argument, "agent simulation needs a target");
  if (cfg.N_L < 2 || cfg.N_F < 2) throw Error(ErrorKind::too_few_agents, "each population needs at least 2 agents");
  if (cfg.update_every == 0 || sc.record_every == 0) throw Error(ErrorKind::invalid_argument, "cadences must be >= 1");
  const double M_F = static_cast<double>(cfg.N_F) / static_cast<double>(cfg.N_L + cfg.N_F);
  if (std::abs(sc.target->M_F() - M_F) > 1e-9)
    throw Error(ErrorKind::mass_mismatch, "target mass must equal N_F / (N_L + N_F)");
  {
    TargetSpec t(sc.target->rho_F(), sc.target->M_F(), sc.target->D(), sc.controller_kernel);
    const FeasibilityReport rep = feasibility_1d(t);
    if (!rep.feasible)
      throw Error(ErrorKind::infeasible, "N_L = " + std::to_string(cfg.N_L) + " is below the minimum leader mass " +
                                             std::to_string(rep.M_hat_L));
  }

  EnsembleResult out;
  out.trials.resize(cfg.n_trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.n_trials; i = next++) out.trials[i] = run_trial(cfg, i);
  };
  std::size_t threads = cfg.threads > 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(1, cfg.n_trials));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<double> e, kl;
  for (const auto& t : out.trials) {
    if (!t.completed) {
      ++out.failed;
      continue;
    }
    e.push_back(t.steady_E_F);
    kl.push_back(t.steady_KL_F);
  }
  auto mean_std = [](const std::vector<double>& v, double& m, double& s) {
    if (v.empty()) {
      m = s = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    s = v.size() > 1 ? std::sqrt(acc / static_cast<double>(v.size() - 1)) : 0.0;
  };
  mean_std(e, out.mean_E_F, out.std_E_F);
  mean_std(kl, out.mean_KL_F, out.std_KL_F);
  return out;
}

}  // namespace lfdc
