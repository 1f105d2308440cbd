#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>

#include "lfdc/deconvolve.hpp"
#include "lfdc/error.hpp"
#include "lfdc/feasibility.hpp"
#include "lfdc/grid.hpp"
#include "lfdc/kernel.hpp"

namespace lfdc {

enum class AlphaRule { off, conservative, optimal };

inline const char* to_string(AlphaRule r) {
  switch (r) {
    case AlphaRule::off: return "off";
    case AlphaRule::conservative: return "conservative";
    case AlphaRule::optimal: return "optimal";
  }
  return "off";
}

struct AlphaSettings {
  AlphaRule rule = AlphaRule::conservative;
  double epsilon = 0.01;  // optimal rule only
};

inline constexpr double follower_density_floor = 1e-8;

inline double clamp01(double a) { return std::clamp(a, 0.0, 1.0); }

/// Largest alpha keeping min(rho_bar) + alpha min(W) >= 0; 1 when W >= 0.
inline double conservative_alpha(double min_rho_L_bar, double min_W) {
  if (min_W >= 0.0) return 1.0;
  return clamp01(-min_rho_L_bar / min_W);
}

/// min_x rho_bar(x) / max(-W(x), epsilon), saturated to [0, 1].
inline double optimal_alpha(const PeriodicField& rho_L_bar, const PeriodicField& W, double epsilon) {
  rho_L_bar.require_same_grid(W);
  if (!(epsilon > 0.0)) throw Error(ErrorKind::invalid_argument, "epsilon must be positive");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < W.size(); ++i) best = std::min(best, rho_L_bar[i] / std::max(-W[i], epsilon));
  return clamp01(best);
}

namespace detail {
inline void require_live_followers(const PeriodicField& rho_F) {
  if (rho_F.min() <= follower_density_floor)
    throw Error(ErrorKind::vanishing_follower_density,
                "follower density reaches " + std::to_string(rho_F.min()));
}
}  // namespace detail

/// w = D rho_bar_x e / (rho_bar rho) with e = rho_bar - rho.
inline PeriodicField feedback_correction(const PeriodicField& rho_F, const PeriodicField& rho_F_bar, double D) {
  rho_F.require_same_grid(rho_F_bar);
  detail::require_live_followers(rho_F);
  const PeriodicField gx = derivative(rho_F_bar);
  PeriodicField w(rho_F.grid(), FieldKind::velocity);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double e = rho_F_bar[i] - rho_F[i];
    w[i] = D * gx[i] * e / (rho_F_bar[i] * rho_F[i]);
  }
  return w;
}

inline PeriodicField feedback_correction(const PeriodicField& rho_F, const TargetSpec& target) {
  return feedback_correction(rho_F, target.rho_F(), target.D());
}

/// Vector form D grad(rho_bar) e / (rho_bar rho) on the torus.
inline VectorField2 feedback_correction_2d(const PeriodicField& rho_F, const PeriodicField& rho_F_bar, double D) {
  rho_F.require_same_grid(rho_F_bar);
  detail::require_live_followers(rho_F);
  PeriodicField s(rho_F.grid());
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = D * (rho_F_bar[i] - rho_F[i]) / (rho_F_bar[i] * rho_F[i]);
  VectorField2 w = multiply(s, gradient(rho_F_bar));
  w.x1.set_kind(FieldKind::velocity);
  w.x2.set_kind(FieldKind::velocity);
  return w;
}

struct GovernorState {
  PeriodicField w;                  // x1 component in 2D
  std::optional<PeriodicField> w2;  // x2 component in 2D
  PeriodicField W;
  double alpha = 0.0;
  double beta = 0.0;
  PeriodicField rho_hat_L;
  PeriodicField rho_hat_L_dt;
  AlphaRule alpha_rule = AlphaRule::off;
};

namespace detail {
inline PeriodicField without_mean(const PeriodicField& f) {
  PeriodicField out = f;
  out += -integrate(f) / f.grid().domain_volume();
  return out;
}
}  // namespace detail

/// Outer loop producing the time-varying leader reference
/// rho_hat = rho_bar + alpha W, where W deconvolves the feedback correction w.
///
/// Only the zero-mean part of w lies in the range of an odd kernel, so the
/// mean of w is removed before deconvolution. W is then fixed to integrate
/// to zero; beta records the constant that achieves it.
class ReferenceGovernor {
 public:
  ReferenceGovernor(const TargetSpec& target, PeriodicField rho_L_bar, AlphaSettings alpha,
                    std::shared_ptr<const KernelTable> controller_kernel)
      : rho_F_bar_(target.rho_F()),
        D_(target.D()),
        rho_L_bar_(std::move(rho_L_bar)),
        min_rho_L_bar_(rho_L_bar_.min()),
        alpha_(alpha),
        kernel_(std::move(controller_kernel)),
        state_{PeriodicField(rho_L_bar_.grid()), std::nullopt, PeriodicField(rho_L_bar_.grid()), 0.0, 0.0,
               rho_L_bar_, PeriodicField(rho_L_bar_.grid()), alpha.rule} {
    if (!kernel_) throw Error(ErrorKind::invalid_argument, "governor needs a kernel table");
    if (kernel_->grid() != rho_L_bar_.grid())
      throw Error(ErrorKind::grid_mismatch, "kernel table and reference grids differ");
    if (min_rho_L_bar_ < -1e-10)
      throw Error(ErrorKind::infeasible, "governor needs a nonnegative steady reference");
    if (alpha_.rule == AlphaRule::optimal && !(alpha_.epsilon > 0.0))
      throw Error(ErrorKind::invalid_argument, "epsilon must be positive");
  }

  /// Advances the governor with the measured follower density. dt is the
  /// spacing to the previous call, used by the backward difference of rho_hat.
  const GovernorState& step(const PeriodicField& rho_F, double dt, Diagnostics* diag = nullptr) {
    const PeriodicGrid& g = rho_L_bar_.grid();
    if (alpha_.rule == AlphaRule::off) {
      state_.alpha = 0.0;
      state_.beta = 0.0;
      state_.rho_hat_L = rho_L_bar_;
      state_.rho_hat_L_dt = PeriodicField(g);
      first_ = false;
      return state_;
    }

    PeriodicField W0(g);
    if (g.dim() == 1) {
      state_.w = feedback_correction(rho_F, rho_F_bar_, D_);
      const PeriodicField wz = detail::without_mean(state_.w);
      const KernelSpec& spec = kernel_->spec();
      W0 = spec.is_single_repulsive() ? deconvolve_1d(wz, spec.length_scale(), ExplicitRule{0.0}, diag)
                                      : deconvolve_spectral(wz, *kernel_, ExplicitRule{0.0}, diag);
    } else {
      VectorField2 w = feedback_correction_2d(rho_F, rho_F_bar_, D_);
      VectorField2 wz(detail::without_mean(w.x1), detail::without_mean(w.x2));
      W0 = deconvolve_2d(wz, *kernel_, ExplicitRule{0.0}, diag);
      state_.w = std::move(w.x1);
      state_.w2 = std::move(w.x2);
    }
    state_.beta = -integrate(W0) / g.domain_volume();
    W0 += state_.beta;
    state_.W = std::move(W0);

    state_.alpha = alpha_.rule == AlphaRule::conservative
                       ? conservative_alpha(min_rho_L_bar_, state_.W.min())
                       : optimal_alpha(rho_L_bar_, state_.W, alpha_.epsilon);

    PeriodicField rho_hat = rho_L_bar_ + state_.W * state_.alpha;
    rho_hat.set_kind(FieldKind::density);
    if (first_) {
      state_.rho_hat_L_dt = PeriodicField(g);
    } else {
      state_.rho_hat_L_dt = (rho_hat - state_.rho_hat_L) * (1.0 / dt);
    }
    state_.rho_hat_L = std::move(rho_hat);
    first_ = false;
    return state_;
  }

  const GovernorState& state() const { return state_; }
  const PeriodicField& rho_L_bar() const { return rho_L_bar_; }
  const AlphaSettings& alpha_settings() const { return alpha_; }

 private:
  PeriodicField rho_F_bar_;
  double D_;
  PeriodicField rho_L_bar_;
  double min_rho_L_bar_;
  AlphaSettings alpha_;
  std::shared_ptr<const KernelTable> kernel_;
  GovernorState state_;
  bool first_ = true;
};

}  // namespace lfdc
