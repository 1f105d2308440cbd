#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace lfdc {

/// Fatal error categories. The names double as the machine-readable error
/// codes emitted by the command line tool.
enum class ErrorKind {
  invalid_argument,
  grid_mismatch,
  non_positive_target,
  infeasible,
  infeasible_2d,
  non_zero_mean_input,
  mass_mismatch,
  vanishing_follower_density,
  numerical_blowup,
  too_few_agents,
  config_parse,
  unknown_scenario,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::grid_mismatch: return "GridMismatch";
    case ErrorKind::non_positive_target: return "NonPositiveTarget";
    case ErrorKind::infeasible: return "Infeasible";
    case ErrorKind::infeasible_2d: return "Infeasible2D";
    case ErrorKind::non_zero_mean_input: return "NonZeroMeanInput";
    case ErrorKind::mass_mismatch: return "MassMismatch";
    case ErrorKind::vanishing_follower_density: return "VanishingFollowerDensity";
    case ErrorKind::numerical_blowup: return "NumericalBlowup";
    case ErrorKind::too_few_agents: return "TooFewAgents";
    case ErrorKind::config_parse: return "ConfigParse";
    case ErrorKind::unknown_scenario: return "UnknownScenario";
    case ErrorKind::io: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Non-fatal conditions. Operations that can degrade gracefully record
/// these instead of throwing.
enum class DiagnosticKind {
  non_periodic_antiderivative,
  vacuum_region,
  ill_conditioned_mode,
  support_violation,
  cfl_warning,
  lyapunov_violation,
};

inline const char* to_string(DiagnosticKind kind) {
  switch (kind) {
    case DiagnosticKind::non_periodic_antiderivative: return "NonPeriodicAntiderivative";
    case DiagnosticKind::vacuum_region: return "VacuumRegion";
    case DiagnosticKind::ill_conditioned_mode: return "IllConditionedMode";
    case DiagnosticKind::support_violation: return "SupportViolation";
    case DiagnosticKind::cfl_warning: return "CflWarning";
    case DiagnosticKind::lyapunov_violation: return "LyapunovViolation";
  }
  return "Unknown";
}

/// Counts diagnostic events and keeps the first few messages of each kind.
class Diagnostics {
 public:
  static constexpr std::size_t kMaxMessages = 8;

  void note(DiagnosticKind kind, const std::string& message, std::size_t count = 1) {
    auto& entry = entries_[kind];
    entry.count += count;
    if (entry.messages.size() < kMaxMessages) entry.messages.push_back(message);
  }

  std::size_t count(DiagnosticKind kind) const {
    auto it = entries_.find(kind);
    return it == entries_.end() ? 0 : it->second.count;
  }

  bool empty() const { return entries_.empty(); }

  void merge(const Diagnostics& other) {
    for (const auto& [kind, entry] : other.entries_) {
      auto& mine = entries_[kind];
      mine.count += entry.count;
      for (const auto& m : entry.messages)
        if (mine.messages.size() < kMaxMessages) mine.messages.push_back(m);
    }
  }

  struct Entry {
    std::size_t count = 0;
    std::vector<std::string> messages;
  };

  const std::map<DiagnosticKind, Entry>& entries() const { return entries_; }

 private:
  std::map<DiagnosticKind, Entry> entries_;
};

inline void note(Diagnostics* diag, DiagnosticKind kind, const std::string& message,
                 std::size_t count = 1) {
  if (diag != nullptr) diag->note(kind, message, count);
}

}  // namespace lfdc
