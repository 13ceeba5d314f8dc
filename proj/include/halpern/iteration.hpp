#pragma once

// Anchored (Halpern) update
//
//     z^{k+1} = beta_k z^0 + (1 - beta_k) z^k - eta_k z~^k,
//     beta_k = 1/(k+2),  eta_k = (1 - beta_k)/L,
//
// where z~^k is G(z^k) (exact), an approximation with ||G(z^k) - z~^k|| <= gamma_k
// (inexact), or a stochastic forward-backward estimate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <sstream>
#include <utility>

#include "halpern/error.hpp"
#include "halpern/operator.hpp"
#include "halpern/schedule.hpp"

namespace halpern {

/// Expert override of beta_k / eta_k. Setting either one voids the rate
/// certificates, whose constants assume the default parameters.
struct ParameterOverride {
  std::function<double(std::size_t)> beta;
  std::function<double(std::size_t)> eta;
};

class HalpernState {
 public:
  HalpernState(Point z0, double L, double divergence_factor = 1e6)
      : z0_(std::move(z0)), z_(z0_), z_prev_(z0_), L_(L), divergence_factor_(divergence_factor) {
    if (!(L_ > 0.0) || !std::isfinite(L_)) throw UsageError("HalpernState: L must be positive");
    if (z0_.size() == 0) throw UsageError("HalpernState: empty starting point");
    if (!all_finite(z0_)) throw UsageError("HalpernState: starting point has non-finite entries");
    scale_ = std::max(1.0, z0_.norm());
  }

  void set_override(ParameterOverride o) { override_ = std::move(o); }
  bool certificates_valid() const noexcept { return !override_.beta && !override_.eta; }

  std::size_t k() const noexcept { return k_; }
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(z0_.size()); }
  double L() const noexcept { return L_; }
  const Point& anchor() const noexcept { return z0_; }
  const Point& iterate() const noexcept { return z_; }
  /// z^{k-1}; equals z^0 before the first step.
  const Point& previous() const noexcept { return z_prev_; }
  /// z~ used by the most recent step (z~^{k-1}).
  const Point& last_ztilde() const noexcept { return ztilde_; }
  bool has_step() const noexcept { return k_ > 0; }

  double beta_at(std::size_t k) const {
    return override_.beta ? override_.beta(k) : 1.0 / (static_cast<double>(k) + 2.0);
  }
  double eta_at(std::size_t k) const { return override_.eta ? override_.eta(k) : (1.0 - beta_at(k)) / L_; }
  double beta() const { return beta_at(k_); }
  double eta() const { return eta_at(k_); }

  /// Applies one anchored update with the supplied z~^k.
  void advance(const Point& ztilde) {
    require_dimension(ztilde, dimension(), "HalpernState::advance");
    const double b = beta();
    const double e = eta();
    Point next = b * z0_ + (1.0 - b) * z_ - e * ztilde;
    if (!all_finite(next)) {
      std::ostringstream os;
      os << "Halpern step " << k_ << ": non-finite iterate (||z^k|| = " << z_.norm()
         << ", ||z~^k|| = " << ztilde.norm() << ", L = " << L_ << ")";
      throw SolverError(os.str());
    }
    if (next.norm() > divergence_factor_ * scale_) {
      std::ostringstream os;
      os << "Halpern step " << k_ << ": divergence guard tripped (||z^{k+1}|| = " << next.norm()
         << " > " << divergence_factor_ << " x initial scale " << scale_ << ")";
      throw SolverError(os.str());
    }
    z_prev_ = std::move(z_);
    z_ = std::move(next);
    ztilde_ = ztilde;
    ++k_;
  }

 private:
  Point z0_;
  Point z_;
  Point z_prev_;
  Point ztilde_;
  double L_;
  double divergence_factor_;
  double scale_ = 1.0;
  std::size_t k_ = 0;
  ParameterOverride override_;
};

inline void step_exact(HalpernState& state, const Operator& G) { state.advance(G(state.iterate())); }

/// Returns z~ with ||G(z) - z~|| <= gamma.
using InexactOracle = std::function<Point(const Point& z, double gamma)>;

/// One inexact step; returns the tolerance gamma_k that was requested.
inline double step_inexact(HalpernState& state, const InexactOracle& oracle, const ToleranceSchedule& schedule) {
  const double gamma = schedule(state.k());
  state.advance(oracle(state.iterate(), gamma));
  return gamma;
}

/// L_k = k(k+1)/(2L) ||G(z^k)||^2 - (k+1) <G(z^k), z^0 - z^k>.
inline double potential_value(std::size_t k, double L, const Point& z0, const Point& zk, const Point& G_val) {
  const double kk = static_cast<double>(k);
  return kk * (kk + 1.0) / (2.0 * L) * G_val.squaredNorm() - (kk + 1.0) * G_val.dot(z0 - zk);
}

inline double potential_value(const HalpernState& state, const Point& G_val) {
  return potential_value(state.k(), state.L(), state.anchor(), state.iterate(), G_val);
}

struct ZdiffReport {
  double first = 0.0;   // relative residual of  z^{k+1}-z^k = b(z^0-z^k) - (1-b)/L z~^k
  double second = 0.0;  // relative residual of  z^{k+1}-z^k = b/(1-b)(z^0-z^{k+1}) - z~^k/L
  double max_residual() const { return std::max(first, second); }
  bool holds(double tol = 1e-12) const { return max_residual() <= tol; }
};

/// Checks both difference identities for the step just taken (state at k+1).
inline ZdiffReport zdiff_identity_check(const HalpernState& state) {
  if (!state.has_step()) throw UsageError("zdiff_identity_check: no step taken yet");
  const std::size_t k = state.k() - 1;
  const double b = state.beta_at(k);
  const double e = state.eta_at(k);
  const Point& z0 = state.anchor();
  const Point& zk = state.previous();
  const Point& zk1 = state.iterate();
  const Point& zt = state.last_ztilde();
  const Point diff = zk1 - zk;
  const Point rhs1 = b * (z0 - zk) - e * zt;
  // With eta = (1-b)/L, e/(1-b) plays the role of 1/L.
  const Point rhs2 = (b / (1.0 - b)) * (z0 - zk1) - (e / (1.0 - b)) * zt;
  const double scale =
      std::max({z0.norm(), zk.norm(), zk1.norm(), (e / (1.0 - b)) * zt.norm(), 1e-300});
  return {(diff - rhs1).norm() / scale, (diff - rhs2).norm() / scale};
}

}  // namespace halpern
