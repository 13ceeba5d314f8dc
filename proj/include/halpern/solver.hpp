#pragma once

// Exact, inexact and stochastic (PAGE) Halpern drivers producing traces.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "halpern/certificates.hpp"
#include "halpern/error.hpp"
#include "halpern/iteration.hpp"
#include "halpern/operator.hpp"
#include "halpern/page.hpp"
#include "halpern/schedule.hpp"
#include "halpern/trace.hpp"

namespace halpern {

struct DriverOptions {
  std::size_t budget = 1000;
  double target_eps = 0.0;  // stop once the logged residual is <= target_eps
  double divergence_factor = 1e6;
  std::size_t evaluation_cost = 0;  // samples charged per exact/inexact evaluation
  ParameterOverride parameter_override;
  std::function<void(const IterationRecord&)> on_row;  // incremental flush
};

namespace detail {

inline HalpernState make_state(const Point& z0, double L, const DriverOptions& opt) {
  HalpernState s(z0, L, opt.divergence_factor);
  if (opt.parameter_override.beta || opt.parameter_override.eta) s.set_override(opt.parameter_override);
  return s;
}

/// Appends `row`, flushes it and returns true when the driver should stop.
inline bool emit(IterationTrace& trace, IterationRecord row, const DriverOptions& opt) {
  trace.rows.push_back(row);
  if (opt.on_row) opt.on_row(trace.rows.back());
  trace.stop = stopping_rule(trace, opt.target_eps, opt.budget);
  return trace.stop.stop;
}

inline void advance_checked(HalpernState& state, const Point& ztilde, IterationTrace& trace) {
  state.advance(ztilde);
  trace.max_identity_residual = std::max(trace.max_identity_residual, zdiff_identity_check(state).max_residual());
}

inline double step_norm(const HalpernState& s) { return s.has_step() ? (s.iterate() - s.previous()).norm() : 0.0; }

}  // namespace detail

/// Exact Halpern iteration on a 1/L-co-coercive operator G.
inline IterationTrace run_exact(const Operator& G, const Point& z0, double L, const DriverOptions& opt = {}) {
  HalpernState state = detail::make_state(z0, L, opt);
  IterationTrace trace;
  trace.certificates_valid = state.certificates_valid();
  std::size_t cum = 0;
  while (true) {
    const Point g = G(state.iterate());
    IterationRecord row;
    row.k = state.k();
    row.res_norm = g.norm();
    row.step_norm = detail::step_norm(state);
    row.potential = potential_value(state, g);
    row.samples = opt.evaluation_cost;
    cum += row.samples;
    row.cum_samples = cum;
    row.error_norm = 0.0;
    if (detail::emit(trace, row, opt)) break;
    detail::advance_checked(state, g, trace);
  }
  return trace;
}

/// Inexact Halpern iteration. When `G_true` is supplied the trace logs the true
/// residual, the exact potential and the realized error ||G(z^k) - z~^k||;
/// otherwise both are computed from z~^k and flagged approximate.
inline IterationTrace run_inexact(const InexactOracle& oracle, const ToleranceSchedule& schedule, const Point& z0,
                                  double L, const DriverOptions& opt = {}, const Operator* G_true = nullptr) {
  HalpernState state = detail::make_state(z0, L, opt);
  IterationTrace trace;
  trace.certificates_valid = state.certificates_valid();
  trace.potential_approximate = G_true == nullptr;
  trace.residual_approximate = G_true == nullptr;
  std::size_t cum = 0;
  while (true) {
    const double gamma = schedule(state.k());
    const Point zt = oracle(state.iterate(), gamma);
    IterationRecord row;
    row.k = state.k();
    row.gamma = gamma;
    row.step_norm = detail::step_norm(state);
    if (G_true) {
      const Point g = (*G_true)(state.iterate());
      row.res_norm = g.norm();
      row.potential = potential_value(state, g);
      row.error_norm = (g - zt).norm();
    } else {
      row.res_norm = zt.norm();
      row.potential = potential_value(state, zt);
    }
    row.samples = opt.evaluation_cost;
    cum += row.samples;
    row.cum_samples = cum;
    if (detail::emit(trace, row, opt)) break;
    detail::advance_checked(state, zt, trace);
  }
  return trace;
}

struct StochasticEstimate {
  Point ztilde;
  std::size_t samples = 0;
  double gamma = 0.0;
  double sigma = 0.0;
};

/// Builds z~^k = (z^k - zbar^k)/a with F~(z^k) from PAGE and zbar^k within
/// (sqrt(2)/2) a gamma_k of J_{aE}(z^k - a F~(z^k)). Advances the PAGE state.
inline StochasticEstimate stochastic_estimate(const HalpernState& state, const FiniteSumInclusion& prob,
                                              PageState& page, const PageParameters& params,
                                              const ToleranceSchedule& gamma_schedule) {
  if (page.k != state.k()) throw UsageError("stochastic step: PAGE state out of sync with the iteration counter");
  const Point& z = state.iterate();
  const std::span<const Operator> comps(prob.components());
  page_estimate(comps, page, z, params);
  StochasticEstimate out;
  out.gamma = gamma_schedule(state.k());
  out.sigma = params.sigma_at(state.k());
  out.samples = page.last_samples;
  const double a = prob.alpha();
  const double accuracy = std::sqrt(2.0) / 2.0 * a * out.gamma;
  Point zbar;
  try {
    zbar = prob.resolvent().inexact(z - a * page.estimate, accuracy);
  } catch (const SolverError& e) {
    throw SolverError(std::string("stochastic step: resolvent failed at gamma_k = ") + std::to_string(out.gamma) +
                      ": " + e.what());
  }
  out.ztilde = (z - zbar) / a;
  return out;
}

/// One step of the stochastic iteration; the state must use L = 1/c with
/// c = cocoercivity_modulus(alpha, L0).
inline StochasticEstimate step_stochastic(HalpernState& state, const FiniteSumInclusion& prob, PageState& page,
                                          const PageParameters& params, const ToleranceSchedule& gamma_schedule) {
  StochasticEstimate est = stochastic_estimate(state, prob, page, params, gamma_schedule);
  state.advance(est.ztilde);
  return est;
}

/// Residual used for instrumentation: exact when the resolvent has an exact
/// map, otherwise a tight inexact evaluation.
inline Point instrumentation_residual(const FiniteSumInclusion& prob, const Point& z) {
  if (prob.resolvent().has_exact()) return residual_exact(prob, z);
  return residual_inexact(prob, z, 1e-10);
}

inline IterationTrace run_stochastic(const FiniteSumInclusion& prob, const Point& z0, const PageParameters& params,
                                     const ToleranceSchedule& gamma_schedule, std::uint64_t seed,
                                     const DriverOptions& opt = {}) {
  const double L = step_constant(prob.alpha(), prob.L0());
  HalpernState state = detail::make_state(z0, L, opt);
  PageState page = make_page_state(seed);
  IterationTrace trace;
  trace.certificates_valid = state.certificates_valid();
  trace.potential_approximate = true;
  trace.residual_approximate = !prob.resolvent().has_exact();
  std::size_t cum = 0;
  while (true) {
    const StochasticEstimate est = stochastic_estimate(state, prob, page, params, gamma_schedule);
    const Point g = instrumentation_residual(prob, state.iterate());
    IterationRecord row;
    row.k = state.k();
    row.res_norm = g.norm();
    row.step_norm = detail::step_norm(state);
    row.potential = potential_value(state, est.ztilde);
    row.gamma = est.gamma;
    row.sigma = est.sigma;
    row.samples = est.samples;
    cum += est.samples;
    row.cum_samples = cum;
    row.error_norm = (g - est.ztilde).norm();
    if (detail::emit(trace, row, opt)) break;
    detail::advance_checked(state, est.ztilde, trace);
  }
  trace.page_capped_events = page.capped_events;
  return trace;
}

}  // namespace halpern
