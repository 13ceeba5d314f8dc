#pragma once

// Ambient vectors, single-valued operators, resolvent oracles and the
// forward-backward residual of a finite-sum monotone inclusion
//
//     0 in E(z) + (1/N) sum_i F_i(z),
//     G(z) = (z - J_{aE}(z - (a/N) sum_i F_i(z))) / a.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "halpern/error.hpp"
#include "halpern/random.hpp"

namespace halpern {

using Point = Eigen::VectorXd;

inline bool all_finite(const Point& z) { return z.allFinite(); }

inline void require_dimension(const Point& z, std::size_t dim, const char* what) {
  if (static_cast<std::size_t>(z.size()) != dim) {
    std::ostringstream os;
    os << what << ": dimension mismatch (expected " << dim << ", got " << z.size() << ")";
    throw UsageError(os.str());
  }
}

/// Single-valued evaluation oracle Point -> Point.
///
/// The primitive is `accumulate(z, scale, out)`, which adds scale * op(z) to
/// `out`. Operators with sparse output (e.g. saddle components touching one
/// dual coordinate) implement it without allocating a dense result.
class Operator {
 public:
  using Accumulate = std::function<void(const Point& z, double scale, Point& out)>;
  using Map = std::function<Point(const Point& z)>;

  Operator() = default;
  Operator(std::size_t dim, Accumulate acc) : dim_(dim), acc_(std::move(acc)) {
    if (dim_ == 0) throw UsageError("Operator: dimension must be positive");
  }

  static Operator from_map(std::size_t dim, Map f) {
    return Operator(dim, [f = std::move(f)](const Point& z, double scale, Point& out) {
      out.noalias() += scale * f(z);
    });
  }

  std::size_t dimension() const noexcept { return dim_; }

  Point operator()(const Point& z) const {
    Point out = Point::Zero(static_cast<Eigen::Index>(dim_));
    acc_(z, 1.0, out);
    return out;
  }

  void accumulate(const Point& z, double scale, Point& out) const { acc_(z, scale, out); }

 private:
  std::size_t dim_ = 0;
  Accumulate acc_;
};

/// Oracle for J_{aE} = (I + aE)^{-1}.
///
/// `inexact(x, accuracy)` must return a point within `accuracy` of the exact
/// resolvent value. When no analytic bound exists (e.g. Dykstra-backed
/// projections) the oracle honours a surrogate criterion and reports
/// `certified() == false`.
class Resolvent {
 public:
  using Exact = std::function<Point(const Point&)>;
  using Inexact = std::function<Point(const Point&, double)>;

  Resolvent() = default;

  static Resolvent identity(std::size_t dim) {
    return from_exact(dim, [](const Point& x) { return x; });
  }

  static Resolvent from_exact(std::size_t dim, Exact exact) {
    Resolvent r;
    r.dim_ = dim;
    r.exact_ = std::move(exact);
    r.certified_ = true;
    return r;
  }

  static Resolvent from_inexact(std::size_t dim, Inexact inexact, bool certified) {
    Resolvent r;
    r.dim_ = dim;
    r.inexact_ = std::move(inexact);
    r.certified_ = certified;
    return r;
  }

  /// Exact map plus an inexact oracle used whenever accuracy > 0.
  static Resolvent with_inexact(std::size_t dim, Exact exact, Inexact inexact, bool certified) {
    Resolvent r;
    r.dim_ = dim;
    r.exact_ = std::move(exact);
    r.inexact_ = std::move(inexact);
    r.certified_ = certified;
    return r;
  }

  std::size_t dimension() const noexcept { return dim_; }
  bool has_exact() const noexcept { return static_cast<bool>(exact_); }
  bool certified() const noexcept { return certified_; }

  Point exact(const Point& x) const {
    if (!exact_) throw UsageError("Resolvent: no exact evaluation available");
    return exact_(x);
  }

  Point inexact(const Point& x, double accuracy) const {
    if (!(accuracy >= 0.0)) throw UsageError("Resolvent: accuracy must be nonnegative");
    if (exact_ && (accuracy == 0.0 || !inexact_)) return exact_(x);
    if (accuracy == 0.0) throw SolverError("Resolvent: zero accuracy requested from an inexact-only oracle");
    return inexact_(x, accuracy);
  }

 private:
  std::size_t dim_ = 0;
  Exact exact_;
  Inexact inexact_;
  bool certified_ = true;
};

/// 0 in E(z) + (1/N) sum_i F_i(z) with J_{aE} given as a resolvent oracle.
/// Immutable after construction.
class FiniteSumInclusion {
 public:
  FiniteSumInclusion(Resolvent resolvent, std::vector<Operator> components, double L0, double alpha)
      : resolvent_(std::move(resolvent)), components_(std::move(components)), L0_(L0), alpha_(alpha) {
    if (components_.empty()) throw UsageError("FiniteSumInclusion: N = 0 components");
    if (!(L0_ > 0.0) || !std::isfinite(L0_)) throw UsageError("FiniteSumInclusion: L0 must be positive");
    if (!(alpha_ > 0.0 && alpha_ < 4.0 / L0_)) {
      std::ostringstream os;
      os << "FiniteSumInclusion: alpha = " << alpha_ << " outside (0, 4/L0) = (0, " << 4.0 / L0_ << ")";
      throw UsageError(os.str());
    }
    dim_ = components_.front().dimension();
    for (const auto& c : components_)
      if (c.dimension() != dim_) throw UsageError("FiniteSumInclusion: components differ in dimension");
    if (resolvent_.dimension() != dim_) throw UsageError("FiniteSumInclusion: resolvent dimension mismatch");
  }

  std::size_t dimension() const noexcept { return dim_; }
  std::size_t size() const noexcept { return components_.size(); }
  double L0() const noexcept { return L0_; }
  double alpha() const noexcept { return alpha_; }
  const Resolvent& resolvent() const noexcept { return resolvent_; }
  const std::vector<Operator>& components() const noexcept { return components_; }

  /// F(z) = (1/N) sum_i F_i(z), summed in index order.
  Point mean_operator(const Point& z) const {
    require_dimension(z, dim_, "FiniteSumInclusion::mean_operator");
    Point out = Point::Zero(static_cast<Eigen::Index>(dim_));
    const double w = 1.0 / static_cast<double>(components_.size());
    for (const auto& c : components_) c.accumulate(z, w, out);
    return out;
  }

 private:
  Resolvent resolvent_;
  std::vector<Operator> components_;
  double L0_;
  double alpha_;
  std::size_t dim_ = 0;
};

/// Forward-backward residual from a given forward value F(z).
inline Point residual_from_forward(const FiniteSumInclusion& prob, const Point& z, const Point& forward) {
  const double a = prob.alpha();
  return (z - prob.resolvent().exact(z - a * forward)) / a;
}

inline Point residual_exact(const FiniteSumInclusion& prob, const Point& z) {
  require_dimension(z, prob.dimension(), "residual_exact");
  if (!prob.resolvent().has_exact()) throw UsageError("residual_exact: resolvent has no exact evaluation");
  return residual_from_forward(prob, z, prob.mean_operator(z));
}

/// z~ = (z - zbar)/a with zbar within a*gamma of J_{aE}(z - a F(z)); hence
/// ||G(z) - z~|| <= gamma when F is exact.
inline Point residual_inexact(const FiniteSumInclusion& prob, const Point& z, double gamma) {
  require_dimension(z, prob.dimension(), "residual_inexact");
  if (!(gamma >= 0.0)) throw UsageError("residual_inexact: gamma must be nonnegative");
  const double a = prob.alpha();
  const Point inner = z - a * prob.mean_operator(z);
  try {
    return (z - prob.resolvent().inexact(inner, a * gamma)) / a;
  } catch (const SolverError& e) {
    std::ostringstream os;
    os << "residual_inexact: resolvent oracle failed at requested gamma = " << gamma << ": " << e.what();
    throw SolverError(os.str());
  }
}

/// Residual operator z -> G(z) as an Operator handle.
inline Operator residual_operator(const FiniteSumInclusion& prob) {
  return Operator::from_map(prob.dimension(), [prob](const Point& z) { return residual_exact(prob, z); });
}

/// G is c-co-coercive with c = a(4 - a L0)/4 when each F_i is 1/L0-co-coercive.
inline double cocoercivity_modulus(double alpha, double L0) {
  if (!(L0 > 0.0)) throw UsageError("cocoercivity_modulus: L0 must be positive");
  if (!(alpha > 0.0 && alpha < 4.0 / L0)) throw UsageError("cocoercivity_modulus: alpha outside (0, 4/L0)");
  return alpha * (4.0 - alpha * L0) / 4.0;
}

/// Step constant L = 1/c used by the Halpern drivers (G is 1/L-co-coercive).
inline double step_constant(double alpha, double L0) { return 1.0 / cocoercivity_modulus(alpha, L0); }

struct CocoercivityReport {
  std::size_t pairs = 0;
  std::size_t violations = 0;
  double worst_margin = 0.0;           // min over pairs of <dG,dx> - c||dG||^2
  double worst_relative_margin = 0.0;  // same, divided by the comparison scale
};

struct CocoercivityOptions {
  double tol = 1e-10;      // relative to max(|<dG,dx>|, c||dG||^2, ||dx||^2)
  double radius = 1.0;     // standard deviation of the default Gaussian sampler
  std::function<Point(Rng&)> sampler;  // overrides the Gaussian sampler
};

/// Samples point pairs and tests <op(x)-op(y), x-y> >= c ||op(x)-op(y)||^2.
/// Half the pairs are far apart, half are local perturbations of the first point.
inline CocoercivityReport check_cocoercive(const Operator& op, double c, std::size_t n_pairs,
                                           std::uint64_t seed, const CocoercivityOptions& opt = {}) {
  if (n_pairs == 0) throw UsageError("check_cocoercive: n_pairs must be >= 1");
  const auto dim = static_cast<Eigen::Index>(op.dimension());
  Rng rng = make_stream(seed, 0x636f636f);
  auto gaussian = [&](double scale) {
    Point p(dim);
    for (Eigen::Index j = 0; j < dim; ++j) p[j] = scale * standard_normal(rng);
    return p;
  };
  auto draw = [&]() { return opt.sampler ? opt.sampler(rng) : gaussian(opt.radius); };

  CocoercivityReport rep;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  rep.worst_relative_margin = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n_pairs; ++t) {
    const Point x = draw();
    Point y = draw();
    if (t % 2 == 1) y = x + 1e-2 * uniform01(rng) * (y - x);
    const Point dG = op(x) - op(y);
    const Point dx = x - y;
    const double inner = dG.dot(dx);
    const double rhs = c * dG.squaredNorm();
    const double margin = inner - rhs;
    const double scale = std::max({std::abs(inner), rhs, dx.squaredNorm(), 1e-300});
    const double rel = margin / scale;
    ++rep.pairs;
    if (rel < -opt.tol) ++rep.violations;
    rep.worst_margin = std::min(rep.worst_margin, margin);
    rep.worst_relative_margin = std::min(rep.worst_relative_margin, rel);
  }
  return rep;
}

}  // namespace halpern
