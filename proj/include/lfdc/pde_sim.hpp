#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lfdc/error.hpp"
#include "lfdc/feasibility.hpp"
#include "lfdc/governor.hpp"
#include "lfdc/grid.hpp"
#include "lfdc/kernel.hpp"
#include "lfdc/leader_control.hpp"
#include "lfdc/metrics.hpp"

namespace lfdc {

enum class Scheme { feed_forward, reference_governor };

inline const char* to_string(Scheme s) {
  return s == Scheme::feed_forward ? "feed_forward" : "reference_governor";
}

/// Constant drift along x1 added to the followers' velocity from onset_time on.
struct Disturbance {
  double amplitude = 0.0;
  double onset_time = 0.0;
};

struct SimConfig {
  int dim = 1;
  std::size_t n = 500;
  double dt = 1e-3;
  std::size_t n_steps = 150000;
  double D = 0.05;
  KernelSpec controller_kernel = KernelSpec::repulsive(pi);
  std::optional<KernelSpec> plant_kernel;  // defaults to controller_kernel
  double K_L = 1.0;
  Scheme scheme = Scheme::feed_forward;
  AlphaSettings alpha{};
  std::optional<Disturbance> disturbance;
  std::optional<PeriodicField> rho_L0;  // default: uniform with mass M_L
  std::optional<PeriodicField> rho_F0;  // default: uniform with mass M_F
  std::optional<TargetSpec> target;
  std::size_t record_every = 100;
  FluxGauge gauge = FluxGauge::minimum_energy;
  double leader_floor = -1.0;  // <= 0 selects 1e-6 M_L / |Omega|
  bool allow_infeasible = false;
  bool monitor_lyapunov = true;

  PeriodicGrid grid() const { return PeriodicGrid(dim, n); }
  const KernelSpec& plant() const { return plant_kernel ? *plant_kernel : controller_kernel; }
};

struct SimRecord {
  std::vector<double> times;
  std::vector<double> e2_L, e2_F;  // squared L2 errors
  std::vector<double> E_L, E_F;    // percentage errors, normalized over the run
  std::vector<double> KL_L, KL_F;
  std::vector<double> alpha;
  std::vector<double> mass_L, mass_F;
  std::vector<double> lyap_residual;  // NaN where the monitor is off

  std::optional<PeriodicField> rho_L0, rho_F0;
  std::optional<PeriodicField> rho_L, rho_F, rho_hat_L;
  std::optional<PeriodicField> rho_L_bar, rho_F_bar;

  double g1_inf = std::numeric_limits<double>::quiet_NaN();
  bool lyapunov_gate = false;  // ||g1||_inf < 2
  std::size_t lyapunov_violations = 0;
  double max_lyap_residual = -std::numeric_limits<double>::infinity();
  double max_mass_drift_L = 0.0;
  double max_mass_drift_F = 0.0;
  double min_rho_hat_L = std::numeric_limits<double>::infinity();
  double M_hat_L = 0.0;
  bool feasible = false;
  std::size_t steps_run = 0;
  bool completed = false;
  std::optional<Error> failure;
  Diagnostics diagnostics;
};

/// Mean of the last `fraction` of a series (at least one sample).
inline double steady_value(const std::vector<double>& series, double fraction = 0.1) {
  if (series.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * series.size())));
  double s = 0.0;
  for (std::size_t i = series.size() - k; i < series.size(); ++i) s += series[i];
  return s / static_cast<double>(k);
}

namespace detail {
inline void require_finite(const PeriodicField& f, const char* what) {
  if (!f.all_finite()) throw Error(ErrorKind::numerical_blowup, std::string(what) + " became non-finite");
}
}  // namespace detail

/// One forward-Euler step of rho_t + div(rho v) = D lap(rho) in flux form.
/// In 2D v2 carries the x2 velocity.
inline PeriodicField step_followers(const PeriodicField& rho_F, const PeriodicField& v1, const PeriodicField* v2,
                                    double D, double dt) {
  PeriodicField rate = laplacian(rho_F) * D;
  rate -= derivative(multiply(rho_F, v1), 1, 0);
  if (v2 != nullptr) rate -= derivative(multiply(rho_F, *v2), 1, 1);
  PeriodicField out = rho_F + rate * dt;
  detail::require_finite(out, "follower density");
  return out;
}

/// Follower velocity f * rho_L + d for a 1D plant.
inline PeriodicField follower_velocity(const KernelTable& plant, const PeriodicField& rho_L, double drift) {
  PeriodicField v = convolve(plant, rho_L);
  if (drift != 0.0) v += drift;
  return v;
}

/// One forward-Euler step of rho_t + div(rho u) = 0. The transported flux is
/// max(rho, 0) u: where the leader density has gone negative through
/// round-off or overshoot there are no leaders to carry it.
inline PeriodicField step_leaders(const PeriodicField& rho_L, const PeriodicField& u1, const PeriodicField* u2,
                                  double dt) {
  PeriodicField carrier = rho_L;
  for (double& v : carrier.data()) v = std::max(v, 0.0);
  PeriodicField rate = derivative(multiply(carrier, u1), 1, 0) * -1.0;
  if (u2 != nullptr) rate -= derivative(multiply(carrier, *u2), 1, 1);
  PeriodicField out = rho_L + rate * dt;
  detail::require_finite(out, "leader density");
  return out;
}

/// Discrete check of the follower energy bound on eta = ||e_F||_2^2:
///   d eta / dt <= -(2D - D ||g1||_inf) eta + ||h1||_inf e^{-K t} eta
///                 + 2 ||h2||_2 e^{-K t} sqrt(eta),
/// with h1 = (f * rho_L0)_x and h2 = (rho_F_bar (f * rho_L0) - D rho_F_bar_x)_x.
/// The residual (lhs - rhs) is scaled by the running maximum of |lhs| and
/// |rhs|; values above the tolerance count as violations.
class LyapunovMonitor {
 public:
  static constexpr double tolerance = 1e-3;

  LyapunovMonitor(double D, double K_L, const PeriodicField& g1, const PeriodicField& rho_F_bar,
                  const PeriodicField& f_conv_rho_L0)
      : D_(D), K_(K_L), g1_inf_(linf_norm(g1)) {
    h1_inf_ = linf_norm(derivative(f_conv_rho_L0));
    PeriodicField inner = multiply(rho_F_bar, f_conv_rho_L0) - derivative(rho_F_bar) * D;
    h2_l2_ = l2_norm(derivative(inner));
  }

  double g1_inf() const { return g1_inf_; }
  bool gate() const { return g1_inf_ < 2.0; }

  double bound(double eta, double t) const {
    const double decay = std::exp(-K_ * t);
    return -(2.0 * D_ - D_ * g1_inf_) * eta + h1_inf_ * decay * eta + 2.0 * h2_l2_ * decay * std::sqrt(eta);
  }

  /// Scaled residual for d eta / dt = deta_dt at time t and state eta.
  double residual(double eta, double deta_dt, double t) {
    const double rhs = bound(eta, t);
    scale_ = std::max({scale_, std::abs(rhs), std::abs(deta_dt)});
    if (scale_ == 0.0) return 0.0;
    return (deta_dt - rhs) / scale_;
  }

 private:
  double D_, K_, g1_inf_;
  double h1_inf_ = 0.0, h2_l2_ = 0.0;
  double scale_ = 0.0;
};

/// Closed-loop leader/follower integrator.
class Simulation {
 public:
  explicit Simulation(SimConfig config) : cfg_(std::move(config)), grid_(cfg_.grid()) {
    if (!(cfg_.dt > 0.0)) throw Error(ErrorKind::invalid_argument, "dt must be positive");
    if (!(cfg_.K_L > 0.0)) throw Error(ErrorKind::invalid_argument, "K_L must be positive");
    if (cfg_.record_every == 0) throw Error(ErrorKind::invalid_argument, "record_every must be >= 1");
    if (!cfg_.target) throw Error(ErrorKind::invalid_argument, "simulation needs a target");
    if (cfg_.target->grid() != grid_) throw Error(ErrorKind::grid_mismatch, "target grid differs from config grid");
    if (cfg_.controller_kernel.dim() != cfg_.dim || cfg_.plant().dim() != cfg_.dim)
      throw Error(ErrorKind::grid_mismatch, "kernel dimension differs from config");
    const TargetSpec& target = *cfg_.target;
    M_L_ = target.M_L();
    controller_ = shared_kernel_table(cfg_.controller_kernel, grid_);
    plant_ = shared_kernel_table(cfg_.plant(), grid_);

    TargetSpec controller_target(target.rho_F(), target.M_F(), target.D(), cfg_.controller_kernel);
    report_ = std::make_unique<FeasibilityReport>(cfg_.dim == 1 ? feasibility_1d(controller_target, &record_.diagnostics)
                                                                : feasibility_2d(controller_target, &record_.diagnostics));
    if (!report_->feasible && !cfg_.allow_infeasible)
      throw Error(cfg_.dim == 1 ? ErrorKind::infeasible : ErrorKind::infeasible_2d,
                  "target needs leader mass " + std::to_string(report_->M_hat_L) + " but M_L = " +
                      std::to_string(M_L_));
    rho_L_bar_ = report_->rho_L_bar;
    if (!report_->feasible)
      for (double& v : rho_L_bar_->data()) v = std::max(v, 0.0);
    if (!report_->feasible) {
      const double m = integrate(*rho_L_bar_);
      *rho_L_bar_ *= M_L_ / m;
    }

    const double volume = grid_.domain_volume();
    rho_L_ = cfg_.rho_L0 ? *cfg_.rho_L0 : PeriodicField::constant(grid_, M_L_ / volume, FieldKind::density);
    rho_F_ = cfg_.rho_F0 ? *cfg_.rho_F0 : PeriodicField::constant(grid_, target.M_F() / volume, FieldKind::density);
    if (rho_L_->grid() != grid_ || rho_F_->grid() != grid_)
      throw Error(ErrorKind::grid_mismatch, "initial densities live on a different grid");
    mass_L0_ = integrate(*rho_L_);
    mass_F0_ = integrate(*rho_F_);
    if (std::abs(mass_L0_ - M_L_) > 1e-6)
      throw Error(ErrorKind::mass_mismatch, "initial leader mass differs from M_L");
    floor_ = cfg_.leader_floor > 0.0 ? cfg_.leader_floor : default_density_floor(M_L_, volume);

    if (cfg_.scheme == Scheme::reference_governor)
      governor_.emplace(controller_target, *rho_L_bar_, cfg_.alpha, controller_);

    if (cfg_.dim == 1 && cfg_.monitor_lyapunov && report_->g1) {
      monitor_.emplace(cfg_.D, cfg_.K_L, *report_->g1, target.rho_F(), convolve(*plant_, *rho_L_));
      record_.g1_inf = monitor_->g1_inf();
      record_.lyapunov_gate = monitor_->gate();
    }
    record_.M_hat_L = report_->M_hat_L;
    record_.feasible = report_->feasible;
    record_.rho_L0 = *rho_L_;
    record_.rho_F0 = *rho_F_;
    record_.rho_L_bar = *rho_L_bar_;
    record_.rho_F_bar = target.rho_F();
    check_diffusion_cfl();
  }

  const FeasibilityReport& feasibility() const { return *report_; }
  const SimConfig& config() const { return cfg_; }

  /// Runs all configured steps. Numerical failures stop the loop and are
  /// stored in the record together with everything recorded up to then.
  SimRecord run() {
    const TargetSpec& target = *cfg_.target;
    try {
      for (std::size_t k = 0; k < cfg_.n_steps; ++k) {
        step(k, target, k % cfg_.record_every == 0);
      }
      const double t_end = static_cast<double>(cfg_.n_steps) * cfg_.dt;
      if (cfg_.dim == 1) {
        const PeriodicField v = follower_velocity(*plant_, *rho_L_, drift(t_end));
        record_point(cfg_.n_steps, target, current_reference(), &v);
      } else {
        record_point(cfg_.n_steps, target, current_reference(), nullptr);
      }
      record_.completed = true;
    } catch (const Error& e) {
      record_.failure = e;
    }
    finalize();
    return std::move(record_);
  }

 private:
  const PeriodicField& current_reference() const {
    return governor_ ? governor_->state().rho_hat_L : *rho_L_bar_;
  }

  double drift(double t) const {
    if (!cfg_.disturbance) return 0.0;
    return t >= cfg_.disturbance->onset_time ? cfg_.disturbance->amplitude : 0.0;
  }

  void step(std::size_t k, const TargetSpec& target, bool record) {
    const double t = static_cast<double>(k) * cfg_.dt;
    const PeriodicField* ref_dt = nullptr;
    alpha_ = 0.0;
    if (governor_) {
      const GovernorState& s = governor_->step(*rho_F_, cfg_.dt, &record_.diagnostics);
      ref_dt = &s.rho_hat_L_dt;
      alpha_ = s.alpha;
      record_.min_rho_hat_L = std::min(record_.min_rho_hat_L, s.rho_hat_L.min());
      if (s.rho_hat_L.min() < -1e-10)
        throw Error(ErrorKind::infeasible, "governor reference became negative");
    }
    const PeriodicField& ref = current_reference();
    const PeriodicField rhs = leader_flux_rhs(*rho_L_, ref, ref_dt, cfg_.K_L);

    if (cfg_.dim == 1) {
      const LeaderControl1D c = recover_u_1d(*rho_L_, rhs, floor_, cfg_.gauge, &record_.diagnostics);
      const PeriodicField v = follower_velocity(*plant_, *rho_L_, drift(t));
      if (record) {
        record_point(k, target, ref, &v);
        check_advection_cfl(c.u, &v, nullptr);
      }
      PeriodicField next_F = step_followers(*rho_F_, v, nullptr, cfg_.D, cfg_.dt);
      rho_L_ = step_leaders(*rho_L_, c.u, nullptr, cfg_.dt);
      rho_F_ = std::move(next_F);
    } else {
      const LeaderControl2D c = recover_u_2d(*rho_L_, rhs, floor_, cfg_.gauge, &record_.diagnostics);
      VectorField2 v = convolve_2d(*plant_, *rho_L_);
      const double d = drift(t);
      if (d != 0.0) v.x1 += d;
      if (record) {
        record_point(k, target, ref, nullptr);
        check_advection_cfl(c.u.x1, &v.x1, &v.x2);
        check_advection_cfl(c.u.x2, nullptr, nullptr);
      }
      PeriodicField next_F = step_followers(*rho_F_, v.x1, &v.x2, cfg_.D, cfg_.dt);
      rho_L_ = step_leaders(*rho_L_, c.u.x1, &c.u.x2, cfg_.dt);
      rho_F_ = std::move(next_F);
    }
    record_.steps_run = k + 1;
  }

  void record_point(std::size_t k, const TargetSpec& target, const PeriodicField& ref, const PeriodicField* v) {
    const double t = static_cast<double>(k) * cfg_.dt;
    if (!record_.times.empty() && record_.times.back() == t) return;
    const PeriodicField eL = ref - *rho_L_;
    const PeriodicField eF = target.rho_F() - *rho_F_;
    const double eta = l2_norm_squared(eF);
    record_.times.push_back(t);
    record_.e2_L.push_back(l2_norm_squared(eL));
    record_.e2_F.push_back(eta);
    record_.KL_L.push_back(kl_divergence(ref, *rho_L_, &record_.diagnostics));
    record_.KL_F.push_back(kl_divergence(target.rho_F(), *rho_F_, &record_.diagnostics));
    record_.alpha.push_back(alpha_);
    const double mL = integrate(*rho_L_);
    const double mF = integrate(*rho_F_);
    record_.mass_L.push_back(mL);
    record_.mass_F.push_back(mF);
    record_.max_mass_drift_L = std::max(record_.max_mass_drift_L, std::abs(mL - mass_L0_));
    record_.max_mass_drift_F = std::max(record_.max_mass_drift_F, std::abs(mF - mass_F0_));

    double residual = std::numeric_limits<double>::quiet_NaN();
    if (monitor_ && v != nullptr) {
      // d eta / dt from the follower update that is about to be applied.
      const PeriodicField next = step_followers(*rho_F_, *v, nullptr, cfg_.D, cfg_.dt);
      const double eta_next = l2_norm_squared(target.rho_F() - next);
      residual = monitor_->residual(eta, (eta_next - eta) / cfg_.dt, t);
      record_.max_lyap_residual = std::max(record_.max_lyap_residual, residual);
      if (residual > LyapunovMonitor::tolerance) {
        ++record_.lyapunov_violations;
        record_.diagnostics.note(DiagnosticKind::lyapunov_violation,
                                 "scaled residual " + std::to_string(residual) + " at t = " + std::to_string(t));
      }
    }
    record_.lyap_residual.push_back(residual);
  }

  void check_diffusion_cfl() {
    const double dx = grid_.dx();
    const double r = cfg_.D * cfg_.dt / (dx * dx) * (cfg_.dim == 2 ? 2.0 : 1.0);
    if (r > 0.5)
      record_.diagnostics.note(DiagnosticKind::cfl_warning, "diffusion number " + std::to_string(r) + " > 0.5");
  }

  void check_advection_cfl(const PeriodicField& u, const PeriodicField* v1, const PeriodicField* v2) {
    const double dx = grid_.dx();
    double m = linf_norm(u);
    if (v1) m = std::max(m, linf_norm(*v1));
    if (v2) m = std::max(m, linf_norm(*v2));
    const double c = m * cfg_.dt / dx;
    if (c > 1.0)
      record_.diagnostics.note(DiagnosticKind::cfl_warning, "advection Courant number " + std::to_string(c) + " > 1");
  }

  void finalize() {
    if (!record_.e2_L.empty()) {
      record_.E_L = percentage_error(record_.e2_L);
      record_.E_F = percentage_error(record_.e2_F);
    }
    record_.rho_L = *rho_L_;
    record_.rho_F = *rho_F_;
    record_.rho_hat_L = current_reference();
  }

  SimConfig cfg_;
  PeriodicGrid grid_;
  double M_L_ = 0.0;
  double mass_L0_ = 0.0, mass_F0_ = 0.0;
  double floor_ = 0.0;
  double alpha_ = 0.0;
  std::shared_ptr<const KernelTable> controller_, plant_;
  std::unique_ptr<FeasibilityReport> report_;
  std::optional<PeriodicField> rho_L_bar_, rho_L_, rho_F_;
  std::optional<ReferenceGovernor> governor_;
  std::optional<LyapunovMonitor> monitor_;
  SimRecord record_;
};

inline SimRecord run(const SimConfig& config) { return Simulation(config).run(); }

}  // namespace lfdc
