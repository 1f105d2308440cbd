#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lfdc/error.hpp"
#include "lfdc/grid.hpp"

namespace lfdc {

/// 100 * e2[t] / max_t e2[t] over the whole history. An all-zero history maps
/// to zeros.
inline std::vector<double> percentage_error(const std::vector<double>& e2_history) {
  if (e2_history.empty()) throw Error(ErrorKind::invalid_argument, "empty error history");
  const double peak = *std::max_element(e2_history.begin(), e2_history.end());
  std::vector<double> out(e2_history.size(), 0.0);
  if (!(peak > 0.0)) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 100.0 * e2_history[i] / peak;
  return out;
}

/// Streaming form of percentage_error: values use the maximum seen so far
/// and are re-normalized by finalize().
class PercentageErrorTracker {
 public:
  double push(double e2) {
    history_.push_back(e2);
    peak_ = std::max(peak_, e2);
    return peak_ > 0.0 ? 100.0 * e2 / peak_ : 0.0;
  }
  std::vector<double> finalize() const {
    return history_.empty() ? std::vector<double>{} : percentage_error(history_);
  }
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
  double peak_ = 0.0;
};

inline constexpr double kl_floor = 1e-12;

/// D_KL = int ref log(ref / actual). Cells where ref <= 0 contribute nothing;
/// the denominator is floored at 1e-12 with a SupportViolation diagnostic.
inline double kl_divergence(const PeriodicField& reference, const PeriodicField& actual,
                            Diagnostics* diag = nullptr) {
  reference.require_same_grid(actual);
  double sum = 0.0;
  std::size_t floored = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double p = reference[i];
    if (p <= 0.0) continue;
    double q = actual[i];
    if (q < kl_floor) {
      q = kl_floor;
      ++floored;
    }
    sum += p * std::log(p / q);
  }
  if (floored > 0)
    note(diag, DiagnosticKind::support_violation,
         std::to_string(floored) + " cells floored in KL denominator", floored);
  return sum * reference.grid().cell_volume();
}

}  // namespace lfdc
