#pragma once

// Finite-sum inclusions for two Wasserstein DRO min-max reformulations.
//
// Supervised learning with a generalized linear model (z = (w, lambda, y)):
//   f_i(x, y) = Psi0(w) + lambda(theta - kappa) + Psi(<phi_i, w>)
//               + y_i (psi_i <phi_i, w> - lambda kappa),
//   X = {||w|| <= lambda/(Lt0 + 1), w in Gamma},  Y = {||y||_inf <= 1},
//   F_i = (grad_x f_i; -grad_y f_i).
//
// Convex-concave loss with 2-Wasserstein ball (z = (x, xi_1, ..., xi_N)):
//   f_i(x, y) = l(x, xi_i),  Y = {sum ||xi_i - xi^_i||^2 <= N theta^2} (n Xi^N).
//
// Strong duality behind both reformulations is a modelling assumption; see
// growth_condition_note().

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "halpern/error.hpp"
#include "halpern/operator.hpp"
#include "halpern/projections.hpp"

namespace halpern {

struct SupervisedDataset {
  Eigen::MatrixXd features;  // N x (d-1)
  Eigen::VectorXd labels;    // entries in {-1, +1}

  std::size_t size() const noexcept { return static_cast<std::size_t>(features.rows()); }
  std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(features.cols()); }

  double max_feature_norm() const {
    double m = 0.0;
    for (Eigen::Index i = 0; i < features.rows(); ++i) m = std::max(m, features.row(i).norm());
    return m;
  }

  void validate() const {
    if (features.rows() == 0) throw DataError("dataset: no samples");
    if (features.cols() == 0) throw DataError("dataset: no feature columns");
    if (labels.size() != features.rows()) throw DataError("dataset: label count differs from sample count");
    if (!features.allFinite()) throw DataError("dataset: non-finite feature value");
    for (Eigen::Index i = 0; i < labels.size(); ++i)
      if (labels[i] != 1.0 && labels[i] != -1.0) {
        std::ostringstream os;
        os << "dataset: label " << labels[i] << " at row " << i << " is not -1 or +1";
        throw DataError(os.str());
      }
  }
};

/// Scalar convex link Psi with derivative, smoothness Lbar0 and Lipschitz Lt0.
struct ScalarLink {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  double smoothness = 0.0;  // Lbar0
  double lipschitz = 0.0;   // Lt0
};

/// Psi(t) = log(1 + e^t): Lbar0 = 1/4, Lt0 = 1.
inline ScalarLink logistic_link() {
  return {"logistic",
          [](double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); },
          [](double t) { return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); },
          0.25, 1.0};
}

/// Psi(t) = t^2/2 restricted to |t| <= range; Lt0 = range holds only there.
inline ScalarLink quadratic_link(double range) {
  if (!(range > 0.0)) throw UsageError("quadratic_link: operating range must be positive");
  return {"quadratic", [](double t) { return 0.5 * t * t; }, [](double t) { return t; }, 1.0, range};
}

/// Regularizer Psi0 on R^{d-1}.
struct Regularizer {
  std::string name;
  std::function<double(const Point&)> value;
  std::function<Point(const Point&)> gradient;
  double smoothness = 0.0;
};

inline Regularizer zero_regularizer() {
  return {"zero", [](const Point&) { return 0.0; }, [](const Point& w) { return Point(Point::Zero(w.size())); }, 0.0};
}

inline Regularizer ridge_regularizer(double rho) {
  if (!(rho >= 0.0)) throw UsageError("ridge_regularizer: rho must be nonnegative");
  return {"ridge", [rho](const Point& w) { return 0.5 * rho * w.squaredNorm(); },
          [rho](const Point& w) { return Point(rho * w); }, rho};
}

struct GlmSpec {
  ScalarLink psi = logistic_link();
  Regularizer psi0 = zero_regularizer();
  double theta = 0.1;  // Wasserstein radius
  double kappa = 1.0;  // label-flip cost
  std::optional<ConvexSet> gamma;  // constraint on w; nullopt = whole space

  void validate() const {
    if (!(theta > 0.0)) throw UsageError("GlmSpec: theta must be positive");
    if (!(kappa > 0.0)) throw UsageError("GlmSpec: kappa must be positive");
    if (!(psi.smoothness > 0.0) || !(psi.lipschitz > 0.0)) throw UsageError("GlmSpec: link constants must be positive");
  }
};

/// Coordinates of z = (w, lambda, y) in R^{(d-1) + 1 + N}.
struct WdrslLayout {
  std::size_t n_features = 0;
  std::size_t n_samples = 0;

  std::size_t x_dim() const noexcept { return n_features + 1; }
  std::size_t total() const noexcept { return n_features + 1 + n_samples; }
  Eigen::Index lambda_index() const noexcept { return static_cast<Eigen::Index>(n_features); }
  Eigen::Index y_offset() const noexcept { return static_cast<Eigen::Index>(n_features + 1); }

  Point join(const Point& x, const Point& y) const {
    Point z(static_cast<Eigen::Index>(total()));
    z << x, y;
    return z;
  }
};

struct SaddleGradient {
  Point grad_x;               // (grad_w, grad_lambda)
  std::size_t y_index = 0;    // grad_y f_i = y_value * e_{y_index}
  double y_value = 0.0;

  Point dense_grad_y(std::size_t n) const {
    Point g = Point::Zero(static_cast<Eigen::Index>(n));
    g[static_cast<Eigen::Index>(y_index)] = y_value;
    return g;
  }
};

namespace detail {
inline void check_sample_index(std::size_t i, const SupervisedDataset& data) {
  if (i >= data.size()) {
    std::ostringstream os;
    os << "wdrsl: sample index " << i << " out of range [0, " << data.size() << ")";
    throw UsageError(os.str());
  }
}
}  // namespace detail

/// Partial gradients of f_i at x = (w, lambda), y. Indices are 0-based.
inline SaddleGradient wdrsl_grad_fi(const Point& x, const Point& y, std::size_t i, const SupervisedDataset& data,
                                    const GlmSpec& spec) {
  detail::check_sample_index(i, data);
  const auto m = static_cast<Eigen::Index>(data.feature_dim());
  if (x.size() != m + 1) throw UsageError("wdrsl_grad_fi: x has wrong dimension");
  if (static_cast<std::size_t>(y.size()) != data.size()) throw UsageError("wdrsl_grad_fi: y has wrong dimension");
  const auto ii = static_cast<Eigen::Index>(i);
  const Point w = x.head(m);
  const double lambda = x[m];
  const Point phi = data.features.row(ii).transpose();
  const double psi = data.labels[ii];
  const double t = phi.dot(w);
  SaddleGradient g;
  g.grad_x.resize(m + 1);
  g.grad_x.head(m) = spec.psi0.gradient(w) + (spec.psi.derivative(t) + y[ii] * psi) * phi;
  g.grad_x[m] = spec.theta - spec.kappa - y[ii] * spec.kappa;
  g.y_index = i;
  g.y_value = psi * t - lambda * spec.kappa;
  return g;
}

/// F_i(z) = (grad_x f_i; -grad_y f_i) as a dense vector.
inline Point wdrsl_saddle_component(const Point& z, std::size_t i, const SupervisedDataset& data, const GlmSpec& spec) {
  const WdrslLayout lay{data.feature_dim(), data.size()};
  require_dimension(z, lay.total(), "wdrsl_saddle_component");
  const auto xd = static_cast<Eigen::Index>(lay.x_dim());
  const SaddleGradient g = wdrsl_grad_fi(z.head(xd), z.tail(static_cast<Eigen::Index>(lay.n_samples)), i, data, spec);
  Point out = Point::Zero(z.size());
  out.head(xd) = g.grad_x;
  out[lay.y_offset() + static_cast<Eigen::Index>(i)] = -g.y_value;
  return out;
}

/// L0 with L0^2 = max{3 Lt0^2 + 3 Lt0^2 M^4 + 2 M^2, 2 kappa^2, 3 M^2 + kappa^2},
/// M = max_i ||phi_i||.
inline double wdrsl_smoothness_constant(const SupervisedDataset& data, double Ltilde0, double kappa) {
  if (data.size() == 0) throw DataError("wdrsl_smoothness_constant: empty dataset");
  const double M = data.max_feature_norm();
  const double M2 = M * M;
  const double L2 = std::max({3.0 * Ltilde0 * Ltilde0 + 3.0 * Ltilde0 * Ltilde0 * M2 * M2 + 2.0 * M2,
                              2.0 * kappa * kappa, 3.0 * M2 + kappa * kappa});
  return std::sqrt(L2);
}

struct WdrslProblem {
  FiniteSumInclusion problem;
  WdrslLayout layout;
  double L0 = 0.0;
  bool exact_projection = true;  // false when X needs Dykstra (Gamma given)

  /// w = 0, lambda = (Lt0 + 1)||w|| + 1, y = 0.
  Point initial_point(double Ltilde0) const {
    Point z = Point::Zero(static_cast<Eigen::Index>(layout.total()));
    z[layout.lambda_index()] = (Ltilde0 + 1.0) * 0.0 + 1.0;
    return z;
  }
};

/// Assembles F_i and J_{aE} = (P_X, P_Y). With Gamma set, P_X is a Dykstra
/// composite of the cone and Gamma x R (non-certified surrogate).
/// `L0_override` replaces the analytic smoothness constant when positive.
inline WdrslProblem build_wdrsl_problem(const SupervisedDataset& data, const GlmSpec& spec, double alpha,
                                        double L0_override = 0.0) {
  data.validate();
  spec.validate();
  const WdrslLayout lay{data.feature_dim(), data.size()};
  const double Lt0 = spec.psi.lipschitz;
  const double L0 = L0_override > 0.0 ? L0_override : wdrsl_smoothness_constant(data, Lt0, spec.kappa);

  auto shared_data = std::make_shared<const SupervisedDataset>(data);
  auto shared_spec = std::make_shared<const GlmSpec>(spec);
  std::vector<Operator> comps;
  comps.reserve(lay.n_samples);
  const auto m = static_cast<Eigen::Index>(lay.n_features);
  for (std::size_t i = 0; i < lay.n_samples; ++i) {
    comps.emplace_back(lay.total(), [shared_data, shared_spec, i, m, lay](const Point& z, double scale, Point& out) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto& d = *shared_data;
      const auto& s = *shared_spec;
      const auto w = z.head(m);
      const double lambda = z[m];
      const double yi = z[lay.y_offset() + ii];
      const double psi = d.labels[ii];
      const auto phi = d.features.row(ii).transpose();
      const double t = phi.dot(w);
      out.head(m) += scale * s.psi0.gradient(Point(w));
      out.head(m) += (scale * (s.psi.derivative(t) + yi * psi)) * phi;
      out[m] += scale * (s.theta - s.kappa - yi * s.kappa);
      out[lay.y_offset() + ii] -= scale * (psi * t - lambda * s.kappa);
    });
  }

  const auto xd = static_cast<Eigen::Index>(lay.x_dim());
  const auto nd = static_cast<Eigen::Index>(lay.n_samples);
  Resolvent resolvent;
  bool exact = true;
  if (!spec.gamma) {
    resolvent = Resolvent::from_exact(lay.total(), [xd, nd, Lt0](const Point& z) {
      Point out(z.size());
      out.head(xd) = project_icecream(z.head(xd), Lt0);
      out.tail(nd) = project_linf_ball(z.tail(nd));
      return out;
    });
  } else {
    if (spec.gamma->dimension() != lay.n_features) throw UsageError("build_wdrsl_problem: Gamma dimension mismatch");
    exact = false;
    const ConvexSet xset = intersection_set({icecream_set(lay.x_dim(), Lt0), lift_leading(*spec.gamma, lay.x_dim())});
    resolvent = Resolvent::from_inexact(
        lay.total(),
        [xset, xd, nd](const Point& z, double acc) {
          Point out(z.size());
          out.head(xd) = xset.project(Point(z.head(xd)), acc);
          out.tail(nd) = project_linf_ball(z.tail(nd));
          return out;
        },
        false);
  }
  return {FiniteSumInclusion(std::move(resolvent), std::move(comps), L0, alpha), lay, L0, exact};
}

// ---------------------------------------------------------------------------
// Convex-concave loss

enum class GroundMetric { euclidean, other };

struct CcLossSpec {
  std::string name = "custom";
  std::size_t x_dim = 0;
  std::size_t xi_dim = 0;
  std::function<Point(const Point& x, const Point& xi)> grad_x;
  std::function<Point(const Point& x, const Point& xi)> grad_xi;
  double L0 = 1.0;       // smoothness of l, user supplied
  double theta = 1.0;    // Wasserstein radius
  double p = 2.0;
  GroundMetric metric = GroundMetric::euclidean;
  std::optional<std::pair<Point, Point>> xi_box;  // Xi as a box; nullopt = whole space
  bool xi_convex = true;
  ConvexSet x_set;                                // feasible set for x (assumed compact)
  std::optional<double> xi_growth_exponent;       // q with l(x, xi) = O(d(xi, xi0)^q), when known
};

/// l(x, xi) = <x, xi>: 1-smooth, linear in each argument.
inline CcLossSpec bilinear_loss(std::size_t dim, double theta, ConvexSet x_set) {
  CcLossSpec s;
  s.name = "bilinear";
  s.x_dim = dim;
  s.xi_dim = dim;
  s.grad_x = [](const Point&, const Point& xi) { return xi; };
  s.grad_xi = [](const Point& x, const Point&) { return x; };
  s.L0 = 1.0;
  s.theta = theta;
  s.x_set = std::move(x_set);
  s.xi_growth_exponent = 1.0;
  return s;
}

struct WdroCcProblem {
  FiniteSumInclusion problem;
  std::size_t x_dim = 0;
  std::size_t xi_dim = 0;
  std::size_t n_samples = 0;
  bool exact_projection = true;
  ConvexSet y_set;

  /// x = P_X(0), y = y^.
  Point initial_point(const Eigen::MatrixXd& xi_hat) const;
};

inline Point WdroCcProblem::initial_point(const Eigen::MatrixXd& xi_hat) const {
  Point z(static_cast<Eigen::Index>(x_dim + n_samples * xi_dim));
  z.head(static_cast<Eigen::Index>(x_dim)).setZero();
  for (std::size_t i = 0; i < n_samples; ++i)
    z.segment(static_cast<Eigen::Index>(x_dim + i * xi_dim), static_cast<Eigen::Index>(xi_dim)) =
        xi_hat.row(static_cast<Eigen::Index>(i)).transpose();
  return z;
}

/// xi_hat: N x d matrix of samples. Y is the ball of radius sqrt(N) theta
/// around y^ (exact), intersected with Xi^N through Dykstra when Xi is a box.
inline WdroCcProblem build_wdro_cc_problem(const Eigen::MatrixXd& xi_hat, const CcLossSpec& spec, double alpha) {
  if (spec.p != 2.0) throw UsageError("build_wdro_cc_problem: only p = 2 is supported");
  if (spec.metric != GroundMetric::euclidean) throw UsageError("build_wdro_cc_problem: only the Euclidean metric is supported");
  if (!spec.grad_x || !spec.grad_xi) throw UsageError("build_wdro_cc_problem: loss gradients missing");
  if (!(spec.theta > 0.0)) throw UsageError("build_wdro_cc_problem: theta must be positive");
  if (xi_hat.rows() == 0) throw DataError("build_wdro_cc_problem: no samples");
  if (static_cast<std::size_t>(xi_hat.cols()) != spec.xi_dim) throw DataError("build_wdro_cc_problem: sample dimension mismatch");
  if (!xi_hat.allFinite()) throw DataError("build_wdro_cc_problem: non-finite sample");
  if (spec.x_set.dimension() != spec.x_dim) throw UsageError("build_wdro_cc_problem: X dimension mismatch");

  const std::size_t n = static_cast<std::size_t>(xi_hat.rows());
  const auto nx = static_cast<Eigen::Index>(spec.x_dim);
  const auto nxi = static_cast<Eigen::Index>(spec.xi_dim);
  const std::size_t total = spec.x_dim + n * spec.xi_dim;

  auto shared = std::make_shared<const CcLossSpec>(spec);
  std::vector<Operator> comps;
  comps.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index off = nx + static_cast<Eigen::Index>(i) * nxi;
    comps.emplace_back(total, [shared, nx, nxi, off](const Point& z, double scale, Point& out) {
      const Point x = z.head(nx);
      const Point xi = z.segment(off, nxi);
      out.head(nx) += scale * shared->grad_x(x, xi);
      out.segment(off, nxi) -= scale * shared->grad_xi(x, xi);
    });
  }

  Point y_hat(static_cast<Eigen::Index>(n) * nxi);
  for (std::size_t i = 0; i < n; ++i) y_hat.segment(static_cast<Eigen::Index>(i) * nxi, nxi) = xi_hat.row(static_cast<Eigen::Index>(i)).transpose();
  const double radius = std::sqrt(static_cast<double>(n)) * spec.theta;
  ConvexSet ball = euclidean_ball_set(y_hat, radius);
  bool exact = spec.x_set.has_exact();
  ConvexSet y_set = ball;
  if (spec.xi_box) {
    const auto& [lo, hi] = *spec.xi_box;
    if (lo.size() != nxi || hi.size() != nxi) throw UsageError("build_wdro_cc_problem: Xi box dimension mismatch");
    y_set = intersection_set({ball, replicate_blocks(box_set(lo, hi), n)});
    exact = false;
  }
  const ConvexSet x_set = spec.x_set;
  const auto ny = static_cast<Eigen::Index>(n) * nxi;
  Resolvent resolvent;
  if (exact) {
    resolvent = Resolvent::from_exact(total, [x_set, y_set, nx, ny](const Point& z) {
      Point out(z.size());
      out.head(nx) = x_set.project(Point(z.head(nx)));
      out.tail(ny) = y_set.project(Point(z.tail(ny)));
      return out;
    });
  } else {
    resolvent = Resolvent::from_inexact(
        total,
        [x_set, y_set, nx, ny](const Point& z, double acc) {
          // Split the accuracy budget evenly across the two blocks.
          Point out(z.size());
          out.head(nx) = x_set.project(Point(z.head(nx)), acc / std::sqrt(2.0));
          out.tail(ny) = y_set.project(Point(z.tail(ny)), acc / std::sqrt(2.0));
          return out;
        },
        false);
  }
  return {FiniteSumInclusion(std::move(resolvent), std::move(comps), spec.L0, alpha), spec.x_dim, spec.xi_dim, n,
          exact, y_set};
}

struct GrowthNote {
  std::string assumption;
  bool verified = false;      // analytic check possible from the declared growth exponent
  bool satisfiable = false;   // only meaningful when verified
  std::vector<std::string> warnings;
};

/// Records the strong-duality hypothesis (convex Xi and finite
/// limsup (l(x,xi) - l(x,xi0)) / d^p(xi, xi0)); it is not checked numerically.
inline GrowthNote growth_condition_note(const CcLossSpec& spec) {
  GrowthNote note;
  std::ostringstream os;
  os << "Strong duality assumed for loss '" << spec.name << "': Xi convex and, for every x, "
     << "limsup_{d(xi,xi0)->inf} (l(x,xi) - l(x,xi0)) / d(xi,xi0)^" << spec.p << " < inf.";
  note.assumption = os.str();
  if (!spec.xi_convex) note.warnings.push_back("Xi declared nonconvex: the min-max reformulation may not be exact");
  if (spec.xi_growth_exponent) {
    note.verified = true;
    note.satisfiable = *spec.xi_growth_exponent <= spec.p;
    std::ostringstream g;
    g << "declared growth exponent " << *spec.xi_growth_exponent << " vs p = " << spec.p
      << (note.satisfiable ? ": growth ratio bounded" : ": growth ratio unbounded");
    if (*spec.xi_growth_exponent < spec.p) g << " (tends to 0)";
    note.warnings.push_back(g.str());
    if (!note.satisfiable) note.warnings.push_back("growth hypothesis violated");
  } else {
    note.warnings.push_back("growth exponent not declared: hypothesis left to the user");
  }
  return note;
}

}  // namespace halpern
