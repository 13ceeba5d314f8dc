#pragma once

// Euclidean projections realizing the resolvents of normal cones used by the
// WDRO builders, plus Dykstra's alternating projections for intersections.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "halpern/error.hpp"
#include "halpern/operator.hpp"

namespace halpern {

/// Componentwise clamp to [-1, 1]: sgn(y_i) min{1, |y_i|}.
inline Point project_linf_ball(const Point& y) { return y.cwiseMax(-1.0).cwiseMin(1.0); }

inline Point project_box(const Point& lo, const Point& hi, const Point& y) {
  if (lo.size() != y.size() || hi.size() != y.size()) throw UsageError("project_box: dimension mismatch");
  if ((lo.array() > hi.array()).any()) throw UsageError("project_box: invalid bounds (lo > hi)");
  return y.cwiseMax(lo).cwiseMin(hi);
}

inline Point project_euclidean_ball(const Point& center, double radius, const Point& y) {
  if (!(radius > 0.0)) throw UsageError("project_euclidean_ball: radius must be positive");
  if (center.size() != y.size()) throw UsageError("project_euclidean_ball: dimension mismatch");
  const Point d = y - center;
  const double n = d.norm();
  if (n <= radius) return y;
  return center + (radius / n) * d;
}

/// Projection onto {(w, lambda) : ||w|| <= lambda / (Lt0 + 1)} where the last
/// coordinate of x is lambda. Cases are tested in order with <=.
inline Point project_icecream(const Point& x, double Ltilde0) {
  if (!(Ltilde0 > 0.0)) throw UsageError("project_icecream: Ltilde0 must be positive");
  if (x.size() < 2) throw UsageError("project_icecream: need at least one w coordinate and lambda");
  const Eigen::Index m = x.size() - 1;
  const double s = 1.0 / (Ltilde0 + 1.0);
  const double lambda = x[m];
  const double wn = x.head(m).norm();
  if (wn <= s * lambda) return x;
  if (s * wn <= -lambda) return Point::Zero(x.size());
  const double rho = (s * wn + lambda) / (s * s + 1.0);
  Point out(x.size());
  out.head(m) = (rho * s / wn) * x.head(m);
  out[m] = rho;
  return out;
}

struct Membership {
  bool inside = false;
  double distance = 0.0;  // exact distance for sets with exact projection, else an estimate
};

/// Closed convex set with a projection oracle.
class ConvexSet {
 public:
  using Projection = std::function<Point(const Point&)>;
  using InexactProjection = std::function<Point(const Point&, double)>;
  using DistanceEstimate = std::function<double(const Point&)>;

  ConvexSet() = default;

  static ConvexSet exact(std::size_t dim, std::string name, Projection project) {
    ConvexSet s;
    s.dim_ = dim;
    s.name_ = std::move(name);
    s.exact_ = std::move(project);
    return s;
  }

  static ConvexSet approximate(std::size_t dim, std::string name, InexactProjection project,
                               DistanceEstimate distance) {
    ConvexSet s;
    s.dim_ = dim;
    s.name_ = std::move(name);
    s.inexact_ = std::move(project);
    s.distance_ = std::move(distance);
    return s;
  }

  std::size_t dimension() const noexcept { return dim_; }
  const std::string& name() const noexcept { return name_; }
  bool has_exact() const noexcept { return static_cast<bool>(exact_); }

  Point project(const Point& x) const {
    if (!exact_) throw UsageError("ConvexSet " + name_ + ": no exact projection");
    require_dimension(x, dim_, "ConvexSet::project");
    return exact_(x);
  }

  Point project(const Point& x, double gamma) const {
    require_dimension(x, dim_, "ConvexSet::project");
    if (exact_) return exact_(x);
    return inexact_(x, gamma);
  }

  Membership membership(const Point& x, double tol = 1e-10) const {
    require_dimension(x, dim_, "ConvexSet::membership");
    const double d = exact_ ? (x - exact_(x)).norm() : distance_(x);
    return {d <= tol * std::max(1.0, x.norm()), d};
  }

 private:
  std::size_t dim_ = 0;
  std::string name_;
  Projection exact_;
  InexactProjection inexact_;
  DistanceEstimate distance_;
};

inline ConvexSet whole_space(std::size_t dim) {
  return ConvexSet::exact(dim, "whole-space", [](const Point& x) { return x; });
}

inline ConvexSet linf_ball_set(std::size_t dim) {
  return ConvexSet::exact(dim, "linf-ball", [](const Point& x) { return project_linf_ball(x); });
}

inline ConvexSet box_set(Point lo, Point hi) {
  if (lo.size() != hi.size()) throw UsageError("box_set: dimension mismatch");
  if ((lo.array() > hi.array()).any()) throw UsageError("box_set: invalid bounds (lo > hi)");
  const auto dim = static_cast<std::size_t>(lo.size());
  return ConvexSet::exact(dim, "box",
                          [lo = std::move(lo), hi = std::move(hi)](const Point& x) { return project_box(lo, hi, x); });
}

inline ConvexSet euclidean_ball_set(Point center, double radius) {
  if (!(radius > 0.0)) throw UsageError("euclidean_ball_set: radius must be positive");
  const auto dim = static_cast<std::size_t>(center.size());
  return ConvexSet::exact(dim, "euclidean-ball", [center = std::move(center), radius](const Point& x) {
    return project_euclidean_ball(center, radius, x);
  });
}

inline ConvexSet icecream_set(std::size_t dim, double Ltilde0) {
  if (!(Ltilde0 > 0.0)) throw UsageError("icecream_set: Ltilde0 must be positive");
  return ConvexSet::exact(dim, "icecream-cone", [Ltilde0](const Point& x) { return project_icecream(x, Ltilde0); });
}

/// S x R^{tail}: applies `set` to the leading coordinates, leaves the rest free.
inline ConvexSet lift_leading(const ConvexSet& set, std::size_t total_dim) {
  if (!set.has_exact()) throw UsageError("lift_leading: factor set needs an exact projection");
  const auto head = static_cast<Eigen::Index>(set.dimension());
  if (set.dimension() > total_dim) throw UsageError("lift_leading: factor larger than total dimension");
  return ConvexSet::exact(total_dim, set.name() + "-lifted", [set, head](const Point& x) {
    Point out = x;
    out.head(head) = set.project(Point(x.head(head)));
    return out;
  });
}

/// S^blocks: the same set applied to consecutive equal-size blocks.
inline ConvexSet replicate_blocks(const ConvexSet& set, std::size_t blocks) {
  if (!set.has_exact()) throw UsageError("replicate_blocks: factor set needs an exact projection");
  const auto b = static_cast<Eigen::Index>(set.dimension());
  return ConvexSet::exact(set.dimension() * blocks, set.name() + "-blocks", [set, b, blocks](const Point& x) {
    Point out(x.size());
    for (std::size_t i = 0; i < blocks; ++i) {
      const auto off = static_cast<Eigen::Index>(i) * b;
      out.segment(off, b) = set.project(Point(x.segment(off, b)));
    }
    return out;
  });
}

struct DykstraResult {
  Point point;
  std::size_t rounds = 0;
  double successive_distance = 0.0;  // ||x_r - x_{r-1}|| over the last round
  double max_set_distance = 0.0;     // max_j dist(x_r, C_j)
};

class DykstraError : public SolverError {
 public:
  DykstraError(const std::string& what, DykstraResult best) : SolverError(what), best_(std::move(best)) {}
  const DykstraResult& best() const noexcept { return best_; }

 private:
  DykstraResult best_;
};

/// Dykstra's alternating projections onto the intersection of `sets`.
///
/// Stops when the successive-iterate distance and the largest distance to any
/// factor set are both <= gamma/2. This is a surrogate: it does not certify
/// that the true projection error is <= gamma.
inline DykstraResult dykstra_project(const std::vector<ConvexSet>& sets, const Point& x, double gamma,
                                     std::size_t max_rounds = 10000) {
  if (sets.empty()) throw UsageError("dykstra_project: no sets");
  if (!(gamma > 0.0)) throw UsageError("dykstra_project: gamma must be positive");
  for (const auto& s : sets) {
    if (!s.has_exact()) throw UsageError("dykstra_project: set " + s.name() + " lacks an exact projection");
    require_dimension(x, s.dimension(), "dykstra_project");
  }
  if (sets.size() == 1) return {sets.front().project(x), 1, 0.0, 0.0};

  std::vector<Point> increments(sets.size(), Point::Zero(x.size()));
  Point cur = x;
  DykstraResult best{cur, 0, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (std::size_t r = 1; r <= max_rounds; ++r) {
    const Point start = cur;
    for (std::size_t j = 0; j < sets.size(); ++j) {
      const Point shifted = cur + increments[j];
      cur = sets[j].project(shifted);
      increments[j] = shifted - cur;
    }
    double set_dist = 0.0;
    for (const auto& s : sets) set_dist = std::max(set_dist, (cur - s.project(cur)).norm());
    const double step = (cur - start).norm();
    if (std::max(step, set_dist) < std::max(best.successive_distance, best.max_set_distance))
      best = {cur, r, step, set_dist};
    if (step <= gamma / 2 && set_dist <= gamma / 2) return {cur, r, step, set_dist};
  }
  std::ostringstream os;
  os << "dykstra_project: " << max_rounds << " rounds exceeded (best successive distance "
     << best.successive_distance << ", best set distance " << best.max_set_distance << ", gamma " << gamma << ")";
  throw DykstraError(os.str(), best);
}

/// Intersection of sets with exact projections; projection via Dykstra.
inline ConvexSet intersection_set(std::vector<ConvexSet> sets, std::size_t max_rounds = 10000) {
  if (sets.empty()) throw UsageError("intersection_set: no sets");
  if (sets.size() == 1) return sets.front();
  const std::size_t dim = sets.front().dimension();
  std::string name = "intersection(";
  for (std::size_t j = 0; j < sets.size(); ++j) name += (j ? "," : "") + sets[j].name();
  name += ")";
  auto shared = std::make_shared<const std::vector<ConvexSet>>(std::move(sets));
  return ConvexSet::approximate(
      dim, name,
      [shared, max_rounds](const Point& x, double gamma) { return dykstra_project(*shared, x, gamma, max_rounds).point; },
      [shared](const Point& x) {
        double d = 0.0;
        for (const auto& s : *shared) d = std::max(d, (x - s.project(x)).norm());
        return d;
      });
}

}  // namespace halpern
