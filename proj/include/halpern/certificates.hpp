#pragma once

// Checks of the non-asymptotic guarantees on logged traces:
//   ||G(z^k)||^2 (k+1)(k+2)        <= (7 L D + 10 sqrt(b_k))^2,
//   ||z^{k+1}-z^k||^2 L^2 (k+1)(k+2) <= 8 (7 L D + 11 sqrt(b_{k+1}))^2,
// with D >= ||z^0 - z*|| and b_k = sum_{i<k} (i+1)^2 tol_i^2, plus the
// per-iteration potential inequality.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "halpern/error.hpp"
#include "halpern/schedule.hpp"
#include "halpern/trace.hpp"

namespace halpern {

struct RateReport {
  bool pass = true;
  std::size_t checked = 0;
  std::size_t worst_k = 0;
  double margin = std::numeric_limits<double>::infinity();  // min (rhs - lhs)/rhs
  bool step_pass = true;
  std::size_t step_checked = 0;
  std::size_t step_worst_k = 0;
  double step_margin = std::numeric_limits<double>::infinity();
  bool all_pass() const { return pass && step_pass; }
};

/// res_sq[k] = ||G(z^k)||^2 (or its seed mean), step_sq[k] = ||z^{k+1}-z^k||^2
/// (may be shorter or empty), tol[i] the per-iteration tolerance (gamma_i, or
/// sigma_i + gamma_i in the stochastic setting). `slack` is relative.
inline RateReport rate_certificate(std::span<const double> res_sq, std::span<const double> step_sq, double L,
                                   double D, std::span<const double> tol, double slack = 1e-9) {
  if (!(L > 0.0) || !(D >= 0.0)) throw UsageError("rate_certificate: need L > 0 and D >= 0");
  RateReport rep;
  const std::size_t n = std::max(res_sq.size(), step_sq.size());
  if (tol.size() + 1 < n) throw UsageError("rate_certificate: tolerance sequence too short");
  double b = 0.0;  // b_k
  for (std::size_t k = 0; k < n; ++k) {
    const double kk = static_cast<double>(k);
    const double denom = (kk + 1.0) * (kk + 2.0);
    if (k < res_sq.size()) {
      const double rhs = std::pow(7.0 * L * D + 10.0 * std::sqrt(b), 2);
      const double lhs = res_sq[k] * denom;
      const double m = rhs > 0.0 ? (rhs - lhs) / rhs : (lhs <= 0.0 ? 0.0 : -std::numeric_limits<double>::infinity());
      ++rep.checked;
      if (lhs > rhs + slack * std::max(1.0, rhs)) rep.pass = false;
      if (m < rep.margin) {
        rep.margin = m;
        rep.worst_k = k;
      }
    }
    const double t = k < tol.size() ? tol[k] : 0.0;
    const double b_next = b + (kk + 1.0) * (kk + 1.0) * t * t;
    if (k < step_sq.size()) {
      const double rhs = 8.0 * std::pow(7.0 * L * D + 11.0 * std::sqrt(b_next), 2);
      const double lhs = step_sq[k] * L * L * denom;
      const double m = rhs > 0.0 ? (rhs - lhs) / rhs : (lhs <= 0.0 ? 0.0 : -std::numeric_limits<double>::infinity());
      ++rep.step_checked;
      if (lhs > rhs + slack * std::max(1.0, rhs)) rep.step_pass = false;
      if (m < rep.step_margin) {
        rep.step_margin = m;
        rep.step_worst_k = k;
      }
    }
    b = b_next;
  }
  return rep;
}

/// Certificate on a single trace; tolerances are gamma_k + sigma_k per row.
inline RateReport rate_certificate(const IterationTrace& trace, double L, double D, double slack = 1e-9) {
  std::vector<double> res_sq, step_sq, tol;
  for (const auto& r : trace.rows) {
    res_sq.push_back(r.res_norm * r.res_norm);
    tol.push_back(r.gamma + r.sigma);
    if (r.k > 0) step_sq.push_back(r.step_norm * r.step_norm);
  }
  return rate_certificate(res_sq, step_sq, L, D, tol, slack);
}

/// Certificate against a schedule rather than the logged tolerances.
inline RateReport rate_certificate(const IterationTrace& trace, double L, double D,
                                   const ToleranceSchedule& schedule, double slack = 1e-9) {
  std::vector<double> res_sq, step_sq, tol;
  for (const auto& r : trace.rows) {
    res_sq.push_back(r.res_norm * r.res_norm);
    tol.push_back(schedule(r.k));
    if (r.k > 0) step_sq.push_back(r.step_norm * r.step_norm);
  }
  return rate_certificate(res_sq, step_sq, L, D, tol, slack);
}

/// Stops once the last logged residual is <= target_eps or k reaches the budget.
inline StopDecision stopping_rule(const IterationTrace& trace, double target_eps, std::size_t budget) {
  if (trace.rows.empty()) return budget == 0 ? StopDecision{true, StopReason::budget, 0} : StopDecision{};
  const auto& last = trace.rows.back();
  if (last.res_norm <= target_eps) return {true, StopReason::converged, last.k};
  if (last.k >= budget) return {true, StopReason::budget, last.k};
  return {false, StopReason::none, last.k};
}

struct PotentialReport {
  std::size_t checked = 0;
  std::size_t violations = 0;
  std::size_t worst_k = 0;
  double worst_relative_margin = std::numeric_limits<double>::infinity();
  bool pass() const { return violations == 0; }
};

/// L_{k+1} <= L_k + ||G(z^k)||^2/(12L) + 4(k+1)^2 ||G(z^k) - z~^k||^2 / L for
/// every logged step. Rows without a recorded error norm use 0.
inline PotentialReport check_potential_inequality(const IterationTrace& trace, double L, double slack = 1e-9) {
  if (trace.potential_approximate)
    throw UsageError("check_potential_inequality: trace carries approximate potentials");
  PotentialReport rep;
  for (std::size_t j = 0; j + 1 < trace.rows.size(); ++j) {
    const auto& r = trace.rows[j];
    const auto& nx = trace.rows[j + 1];
    const double kk = static_cast<double>(r.k);
    const double err = std::isnan(r.error_norm) ? 0.0 : r.error_norm;
    const double g_term = r.res_norm * r.res_norm / (12.0 * L);
    const double e_term = 4.0 * (kk + 1.0) * (kk + 1.0) * err * err / L;
    const double rhs = r.potential + g_term + e_term;
    const double scale = std::max({std::abs(r.potential), std::abs(nx.potential), g_term, e_term, 1e-300});
    const double rel = (rhs - nx.potential) / scale;
    ++rep.checked;
    if (rel < -slack) ++rep.violations;
    if (rel < rep.worst_relative_margin) {
      rep.worst_relative_margin = rel;
      rep.worst_k = r.k;
    }
  }
  return rep;
}

}  // namespace halpern
