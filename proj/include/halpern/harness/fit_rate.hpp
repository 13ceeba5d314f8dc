#pragma once

// Least-squares fit of log(res_norm) against log(k).

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "halpern/error.hpp"
#include "halpern/trace.hpp"

namespace halpern::harness {

struct RateFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  bool converged_exactly = false;  // every residual at k >= k_min is zero
  bool pass = false;               // slope <= -0.9, or converged exactly
};

inline RateFit fit_log_log(std::span<const double> x, std::span<const double> y) {
  RateFit f;
  const std::size_t n = x.size();
  f.used = n;
  if (n < 2) return f;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

/// Uses rows with k >= max(k_min, 1) and res_norm > 0; needs at least 10.
inline RateFit fit_rate(std::span<const IterationRecord> rows, std::size_t k_min) {
  std::vector<double> x, y;
  std::size_t candidates = 0;
  for (const auto& r : rows) {
    if (r.k < k_min || r.k == 0) continue;
    ++candidates;
    if (r.res_norm > 0.0 && std::isfinite(r.res_norm)) {
      x.push_back(std::log(static_cast<double>(r.k)));
      y.push_back(std::log(r.res_norm));
    }
  }
  if (candidates > 0 && x.empty()) {
    RateFit f;
    f.converged_exactly = true;
    f.pass = true;
    return f;
  }
  if (x.size() < 10)
    throw DataError("fit_rate: need at least 10 usable rows with k >= " + std::to_string(k_min) + ", found " +
                    std::to_string(x.size()));
  RateFit f = fit_log_log(x, y);
  f.pass = f.slope <= -0.9;
  return f;
}

}  // namespace halpern::harness
