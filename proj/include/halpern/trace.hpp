#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace halpern {

/// One row per iterate z^k. `step_norm` is ||z^k - z^{k-1}|| (0 for k = 0);
/// gamma, sigma and samples describe the work done at iterate k to form z~^k.
struct IterationRecord {
  std::size_t k = 0;
  double res_norm = 0.0;
  double step_norm = 0.0;
  double potential = 0.0;
  double gamma = 0.0;
  double sigma = 0.0;
  std::size_t samples = 0;
  std::size_t cum_samples = 0;
  // In-memory diagnostics, not persisted.
  double error_norm = std::numeric_limits<double>::quiet_NaN();  // ||G(z^k) - z~^k||
};

enum class StopReason { none, converged, budget };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::none: return "none";
    case StopReason::converged: return "converged";
    case StopReason::budget: return "budget";
  }
  return "none";
}

struct StopDecision {
  bool stop = false;
  StopReason reason = StopReason::none;
  std::size_t k = 0;
};

struct IterationTrace {
  std::vector<IterationRecord> rows;
  bool potential_approximate = false;  // potential logged with z~^k in place of G(z^k)
  bool residual_approximate = false;   // res_norm from a surrogate (no exact resolvent)
  bool certificates_valid = true;      // false under a beta/eta override
  double max_identity_residual = 0.0;  // worst difference-identity residual over all steps
  std::size_t page_capped_events = 0;
  StopDecision stop;
};

}  // namespace halpern
