#pragma once

// PAGE variance-reduced estimator of F(z^k) = (1/N) sum_i F_i(z^k):
//
//   with probability p_k:      (1/N1_k) sum_{i in S1} F_i(z^k)
//   with probability 1 - p_k:  F~(z^{k-1}) + (1/N2_k) sum_{i in S2} (F_i(z^k) - F_i(z^{k-1}))
//
// with i.i.d. (with replacement) minibatches and the schedule
//   sigma_k = eps/(k+1)^a,
//   p_k     = 1 - r^{2a} / (2 - r^{2a+1}),  r = k/(k+1),
//   N1_k    = ceil(2 sigma^2 (k+1)^{2a} / eps^2),
//   N2_k    = ceil(2 L0^2 ||z^k - z^{k-1}||^2 (k+1)^{2a+1} / eps^2),
// which keeps E||F~(z^k) - F(z^k)||^2 <= sigma_k^2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "halpern/error.hpp"
#include "halpern/operator.hpp"
#include "halpern/random.hpp"
#include "halpern/schedule.hpp"

namespace halpern {

struct PageSchedule {
  double p = 1.0;
  double sigma_k = 0.0;
  double n1_formula = 0.0;  // value before ceil/cap
  double n2_formula = 0.0;
  std::size_t n1 = 1;
  std::size_t n2 = 1;
  bool n1_capped = false;
  bool n2_capped = false;
};

inline std::size_t clamp_sample_count(double raw, double cap, bool& capped) {
  capped = raw > cap;
  const double v = std::ceil(std::min(raw, cap));
  return v < 1.0 ? 1 : static_cast<std::size_t>(v);
}

/// Schedule values at iteration k. `z_diff_norm` = ||z^k - z^{k-1}|| is unused
/// at k = 0. Sample sizes are clamped to [1, cap].
inline PageSchedule page_schedule(double eps, double a, double sigma, double L0, std::size_t k,
                                  double z_diff_norm, double cap = std::numeric_limits<double>::infinity()) {
  if (!(eps > 0.0)) throw UsageError("page_schedule: eps must be positive");
  if (!(a > 0.0)) throw UsageError("page_schedule: a must be positive");
  if (!(sigma >= 0.0) || !(L0 >= 0.0)) throw UsageError("page_schedule: sigma and L0 must be nonnegative");
  const double kp1 = static_cast<double>(k) + 1.0;
  PageSchedule s;
  s.sigma_k = eps / std::pow(kp1, a);
  if (k == 0) {
    s.p = 1.0;
  } else {
    const double r = static_cast<double>(k) / kp1;
    s.p = 1.0 - std::pow(r, 2.0 * a) / (2.0 - std::pow(r, 2.0 * a + 1.0));
  }
  s.n1_formula = 2.0 * sigma * sigma * std::pow(kp1, 2.0 * a) / (eps * eps);
  s.n1 = clamp_sample_count(s.n1_formula, cap, s.n1_capped);
  if (k > 0) {
    s.n2_formula = 2.0 * L0 * L0 * z_diff_norm * z_diff_norm * std::pow(kp1, 2.0 * a + 1.0) / (eps * eps);
    s.n2 = clamp_sample_count(s.n2_formula, cap, s.n2_capped);
  }
  return s;
}

/// Mean of F_i(z) over a multiset of indices (with multiplicity). Indices are
/// tallied first and reduced in index order.
inline Point minibatch_mean(std::span<const Operator> components, std::span<const std::size_t> indices,
                            const Point& z) {
  if (indices.empty()) throw UsageError("minibatch_mean: empty index multiset");
  if (components.empty()) throw UsageError("minibatch_mean: no components");
  std::vector<std::uint32_t> counts(components.size(), 0);
  for (auto i : indices) {
    if (i >= components.size()) throw UsageError("minibatch_mean: index out of range");
    ++counts[i];
  }
  Point out = Point::Zero(static_cast<Eigen::Index>(components.front().dimension()));
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (counts[i] != 0) components[i].accumulate(z, counts[i] * inv, out);
  return out;
}

struct PageParameters {
  double eps = 1.0;
  double a = 2.0;
  double sigma = 0.0;         // variance bound: user-supplied or pilot estimate
  double L0 = 1.0;            // Lipschitz constant of each F_i
  double cap_multiple = 10.0; // N1, N2 <= cap_multiple * N; <= 0 disables the cap
  bool full_batch_override = false;  // use the exact mean when a batch size reaches N
  bool exact = false;                // sigma_k == 0: F~ = F every iteration

  /// Matches PAGE to an inexactness schedule: A(eps) -> (eps, a = 1/2),
  /// B(a) -> (1, a), zero -> exact full batches.
  static PageParameters from_schedule(const ToleranceSchedule& schedule, double sigma, double L0) {
    PageParameters p;
    p.sigma = sigma;
    p.L0 = L0;
    switch (schedule.kind()) {
      case ToleranceSchedule::Kind::zero: p.exact = true; break;
      case ToleranceSchedule::Kind::sqrt_decay: p.eps = schedule.eps(); p.a = 0.5; break;
      case ToleranceSchedule::Kind::power_decay: p.eps = 1.0; p.a = schedule.exponent(); break;
    }
    return p;
  }

  double cap(std::size_t n) const {
    return cap_multiple > 0.0 ? cap_multiple * static_cast<double>(n) : std::numeric_limits<double>::infinity();
  }

  double sigma_at(std::size_t k) const {
    return exact ? 0.0 : eps / std::pow(static_cast<double>(k) + 1.0, a);
  }
};

struct PageState {
  std::size_t k = 0;
  Point estimate;   // F~(z^{k-1}) after the last call
  Point z_prev;     // point of the last call
  std::uint64_t seed = 0;
  std::size_t n1_drawn = 0;
  std::size_t n2_drawn = 0;
  std::size_t capped_events = 0;
  // last call
  std::size_t last_samples = 0;
  bool last_refresh = true;
  PageSchedule last_schedule;

  std::size_t total_drawn() const noexcept { return n1_drawn + n2_drawn; }
};

inline PageState make_page_state(std::uint64_t seed) {
  PageState s;
  s.seed = seed;
  return s;
}

/// Advances `state` to the estimate F~(z_new) for iteration state.k.
/// Branch choice and index draws use the substream (seed, k).
inline void page_estimate(std::span<const Operator> components, PageState& state, const Point& z_new,
                          const PageParameters& params) {
  if (components.empty()) throw UsageError("page_estimate: no components");
  const std::size_t n = components.size();
  const auto dim = static_cast<Eigen::Index>(components.front().dimension());
  require_dimension(z_new, components.front().dimension(), "page_estimate");
  auto full_mean = [&](const Point& z) {
    Point out = Point::Zero(dim);
    const double w = 1.0 / static_cast<double>(n);
    for (const auto& c : components) c.accumulate(z, w, out);
    return out;
  };

  const std::size_t k = state.k;
  if (params.exact) {
    state.estimate = full_mean(z_new);
    state.last_samples = n;
    state.last_refresh = true;
    state.last_schedule = PageSchedule{};
    state.last_schedule.n1 = n;
    state.n1_drawn += n;
  } else {
    const double zdiff = k > 0 ? (z_new - state.z_prev).norm() : 0.0;
    const PageSchedule sched = page_schedule(params.eps, params.a, params.sigma, params.L0, k, zdiff, params.cap(n));
    Rng rng = make_stream(state.seed, 0x50414745, k);
    const bool refresh = k == 0 || uniform01(rng) < sched.p;
    if (refresh) {
      if (sched.n1_capped) ++state.capped_events;
      if (params.full_batch_override && sched.n1 >= n) {
        state.estimate = full_mean(z_new);
        state.last_samples = n;
      } else {
        std::vector<std::size_t> idx(sched.n1);
        for (auto& i : idx) i = uniform_index(rng, n);
        state.estimate = minibatch_mean(components, idx, z_new);
        state.last_samples = sched.n1;
      }
      state.n1_drawn += state.last_samples;
    } else {
      if (sched.n2_capped) ++state.capped_events;
      if (params.full_batch_override && sched.n2 >= n) {
        state.estimate += full_mean(z_new) - full_mean(state.z_prev);
        state.last_samples = n;
      } else {
        std::vector<std::uint32_t> counts(n, 0);
        for (std::size_t t = 0; t < sched.n2; ++t) ++counts[uniform_index(rng, n)];
        const double inv = 1.0 / static_cast<double>(sched.n2);
        Point delta = Point::Zero(dim);
        for (std::size_t i = 0; i < n; ++i) {
          if (counts[i] == 0) continue;
          components[i].accumulate(z_new, counts[i] * inv, delta);
          components[i].accumulate(state.z_prev, -(counts[i] * inv), delta);
        }
        state.estimate += delta;
        state.last_samples = sched.n2;
      }
      state.n2_drawn += state.last_samples;
    }
    state.last_refresh = refresh;
    state.last_schedule = sched;
  }
  state.z_prev = z_new;
  ++state.k;
}

/// Heuristic pilot estimate of the variance bound: 1.5 x the largest
/// ||F_i(z) - F(z)|| over `sample_size` i.i.d. indices (all indices when
/// sample_size >= N).
inline double estimate_sigma(std::span<const Operator> components, const Point& z, std::size_t sample_size,
                             std::uint64_t seed) {
  if (components.empty()) throw UsageError("estimate_sigma: no components");
  const std::size_t n = components.size();
  Point mean = Point::Zero(static_cast<Eigen::Index>(components.front().dimension()));
  for (const auto& c : components) c.accumulate(z, 1.0 / static_cast<double>(n), mean);
  double worst = 0.0;
  Rng rng = make_stream(seed, 0x7069696c);
  const std::size_t m = std::min(sample_size, n);
  for (std::size_t t = 0; t < m; ++t) {
    const std::size_t i = sample_size >= n ? t : uniform_index(rng, n);
    worst = std::max(worst, (components[i](z) - mean).norm());
  }
  return 1.5 * worst;
}

}  // namespace halpern
