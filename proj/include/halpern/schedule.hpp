#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>

#include "halpern/error.hpp"

namespace halpern {

/// Inexactness tolerances gamma_k.
///
///   zero:        gamma_k = 0
///   sqrt_decay:  gamma_k = eps / sqrt(k+1)        ("A")
///   power_decay: gamma_k = (k+1)^{-a}, a > 3/2    ("B"), so sum (k+1)^2 gamma_k^2 < inf
class ToleranceSchedule {
 public:
  enum class Kind { zero, sqrt_decay, power_decay };

  ToleranceSchedule() = default;

  static ToleranceSchedule zero() { return {}; }

  static ToleranceSchedule sqrt_decay(double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw UsageError("ToleranceSchedule A: eps must be positive");
    ToleranceSchedule s;
    s.kind_ = Kind::sqrt_decay;
    s.eps_ = eps;
    return s;
  }

  static ToleranceSchedule power_decay(double a) {
    if (!(a > 1.5) || !std::isfinite(a)) throw UsageError("ToleranceSchedule B: exponent a must exceed 3/2");
    ToleranceSchedule s;
    s.kind_ = Kind::power_decay;
    s.a_ = a;
    return s;
  }

  /// Parses "zero", "A" or "B" with the matching parameter.
  static ToleranceSchedule parse(const std::string& kind, double eps, double a) {
    if (kind == "zero" || kind == "0") return zero();
    if (kind == "A" || kind == "a") return sqrt_decay(eps);
    if (kind == "B" || kind == "b") return power_decay(a);
    throw UsageError("unknown schedule kind '" + kind + "' (expected zero, A or B)");
  }

  Kind kind() const noexcept { return kind_; }
  double eps() const noexcept { return eps_; }
  double exponent() const noexcept { return a_; }

  std::string label() const {
    switch (kind_) {
      case Kind::zero: return "zero";
      case Kind::sqrt_decay: return "A";
      case Kind::power_decay: return "B";
    }
    return "zero";
  }

  double operator()(std::size_t k) const {
    const double kp1 = static_cast<double>(k) + 1.0;
    switch (kind_) {
      case Kind::zero: return 0.0;
      case Kind::sqrt_decay: return eps_ / std::sqrt(kp1);
      case Kind::power_decay: return std::pow(kp1, -a_);
    }
    return 0.0;
  }

 private:
  Kind kind_ = Kind::zero;
  double eps_ = 0.0;
  double a_ = 0.0;
};

}  // namespace halpern
