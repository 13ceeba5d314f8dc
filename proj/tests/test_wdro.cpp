#include "catch_amalgamated.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "halpern/projections.hpp"
#include "halpern/random.hpp"
#include "halpern/solver.hpp"
#include "halpern/wdro.hpp"

using namespace halpern;
using Catch::Approx;

namespace {

Point vec(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

SupervisedDataset random_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0x64);
  SupervisedDataset data;
  data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d - 1));
  data.labels.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) data.features(i, j) = standard_normal(rng);
    data.labels[i] = uniform01(rng) < 0.5 ? -1.0 : 1.0;
  }
  return data;
}

Point random_point(Eigen::Index n, Rng& rng, double scale = 1.0) {
  Point p(n);
  for (Eigen::Index i = 0; i < n; ++i) p[i] = scale * standard_normal(rng);
  return p;
}

// f_i(x, y) written out from its definition
double f_value(const Point& x, const Point& y, std::size_t i, const SupervisedDataset& data, const GlmSpec& spec) {
  const auto m = x.size() - 1;
  const auto ii = static_cast<Eigen::Index>(i);
  const Point w = x.head(m);
  const double lambda = x[m];
  const double t = data.features.row(ii).dot(w);
  return spec.psi0.value(w) + lambda * (spec.theta - spec.kappa) + spec.psi.value(t) +
         y[ii] * (data.labels[ii] * t - lambda * spec.kappa);
}

Point full_gradient(const Point& x, const Point& y, std::size_t i, const SupervisedDataset& data, const GlmSpec& spec) {
  const SaddleGradient g = wdrsl_grad_fi(x, y, i, data, spec);
  Point out(x.size() + y.size());
  out << g.grad_x, g.dense_grad_y(data.size());
  return out;
}

Point project_xy(const Point& z, Eigen::Index xd, double Lt0) {
  Point out(z.size());
  out.head(xd) = project_icecream(z.head(xd), Lt0);
  out.tail(z.size() - xd) = project_linf_ball(z.tail(z.size() - xd));
  return out;
}

}  // namespace

TEST_CASE("WDRSL gradient at the origin") {
  SupervisedDataset data;
  data.features = Eigen::MatrixXd::Zero(1, 2);
  data.features(0, 0) = 1.0;
  data.labels = Eigen::VectorXd::Ones(1);
  GlmSpec spec;
  spec.psi = quadratic_link(10.0);
  spec.theta = 0.1;
  spec.kappa = 0.2;
  const SaddleGradient g = wdrsl_grad_fi(Point::Zero(3), Point::Zero(1), 0, data, spec);
  CHECK((g.grad_x - vec({0.0, 0.0, -0.1})).norm() <= 1e-16);
  CHECK(g.y_value == 0.0);
  CHECK(g.dense_grad_y(1).norm() == 0.0);
  CHECK_THROWS_AS(wdrsl_grad_fi(Point::Zero(3), Point::Zero(1), 1, data, spec), UsageError);
  CHECK_THROWS_AS(wdrsl_grad_fi(Point::Zero(2), Point::Zero(1), 0, data, spec), UsageError);
}

TEST_CASE("feature-free data leaves only the regularizer in the w-gradient") {
  SupervisedDataset data;
  data.features = Eigen::MatrixXd::Zero(3, 2);
  data.labels = vec({1, -1, 1});
  GlmSpec spec;
  spec.psi0 = ridge_regularizer(0.7);
  Rng rng = make_stream(1, 1);
  for (int t = 0; t < 20; ++t) {
    const Point x = random_point(3, rng);
    const Point y = random_point(3, rng);
    for (std::size_t i = 0; i < 3; ++i) {
      const SaddleGradient g = wdrsl_grad_fi(x, y, i, data, spec);
      REQUIRE((g.grad_x.head(2) - 0.7 * x.head(2)).norm() <= 1e-15);
    }
  }
}

TEST_CASE("WDRSL gradients match central differences") {
  for (std::uint64_t inst = 1; inst <= 3; ++inst) {
    const SupervisedDataset data = random_dataset(6, 4, inst);
    GlmSpec spec;
    spec.theta = 0.3;
    spec.kappa = 0.8;
    if (inst == 2) spec.psi0 = ridge_regularizer(0.5);
    if (inst == 3) spec.psi = quadratic_link(5.0);
    Rng rng = make_stream(inst, 2);
    const double h = 1e-6;
    for (int t = 0; t < 100; ++t) {
      const Point x = random_point(4, rng);
      const Point y = random_point(6, rng, 0.5);
      const std::size_t i = uniform_index(rng, 6);
      const Point g = full_gradient(x, y, i, data, spec);
      Point fd(10);
      for (Eigen::Index j = 0; j < 10; ++j) {
        Point xp = x, xm = x, yp = y, ym = y;
        if (j < 4) {
          xp[j] += h;
          xm[j] -= h;
        } else {
          yp[j - 4] += h;
          ym[j - 4] -= h;
        }
        fd[j] = (f_value(xp, yp, i, data, spec) - f_value(xm, ym, i, data, spec)) / (2.0 * h);
      }
      REQUIRE((fd - g).norm() <= 1e-5 * std::max(1.0, g.norm()));
    }
  }
}

TEST_CASE("saddle component layout and support") {
  const SupervisedDataset data = random_dataset(5, 3, 4);
  GlmSpec spec;
  spec.theta = 0.2;
  spec.kappa = 0.5;
  const WdrslLayout lay{2, 5};
  CHECK(lay.total() == 8);
  Rng rng = make_stream(4, 4);
  for (int t = 0; t < 20; ++t) {
    const Point z = random_point(8, rng);
    for (std::size_t i = 0; i < 5; ++i) {
      const Point F = wdrsl_saddle_component(z, i, data, spec);
      const SaddleGradient g = wdrsl_grad_fi(z.head(3), z.tail(5), i, data, spec);
      REQUIRE(F.head(3) == g.grad_x);
      for (std::size_t j = 0; j < 5; ++j) {
        const double v = F[lay.y_offset() + static_cast<Eigen::Index>(j)];
        if (j == i) REQUIRE(v == -g.y_value);
        else REQUIRE(v == 0.0);
      }
      REQUIRE(g.dense_grad_y(5).cwiseAbs().sum() == std::abs(g.y_value));
    }
  }
  // w = 0, lambda = 0, y = 0: (Psi0'(0) + Psi'(0) phi_i; theta - kappa; 0)
  for (std::size_t i = 0; i < 5; ++i) {
    const Point F = wdrsl_saddle_component(Point::Zero(8), i, data, spec);
    const Point phi = data.features.row(static_cast<Eigen::Index>(i)).transpose();
    CHECK((F.head(2) - 0.5 * phi).norm() <= 1e-16);
    CHECK(F[2] == Approx(spec.theta - spec.kappa));
    CHECK(F.tail(5).norm() == 0.0);
  }
  // theta = kappa removes the constant drift in lambda
  spec.theta = spec.kappa;
  CHECK(wdrsl_saddle_component(Point::Zero(8), 0, data, spec)[2] == 0.0);
}

TEST_CASE("saddle components are monotone but not co-coercive") {
  const SupervisedDataset data = random_dataset(8, 4, 5);
  GlmSpec spec;
  spec.theta = 0.2;
  const double L0 = wdrsl_smoothness_constant(data, spec.psi.lipschitz, spec.kappa);
  const WdrslProblem wp = build_wdrsl_problem(data, spec, 1.0 / L0);
  Rng rng = make_stream(5, 5);
  const Operator mean = Operator(wp.layout.total(), [&wp](const Point& z, double s, Point& out) {
    for (const auto& c : wp.problem.components()) c.accumulate(z, s / 8.0, out);
  });
  for (int t = 0; t < 2000; ++t) {
    const Point z1 = random_point(13, rng, 2.0), z2 = random_point(13, rng, 2.0);
    const double scale = std::max(1.0, (z1 - z2).squaredNorm());
    for (const auto& c : wp.problem.components()) REQUIRE((c(z1) - c(z2)).dot(z1 - z2) >= -1e-10 * scale);
    REQUIRE((mean(z1) - mean(z2)).dot(z1 - z2) >= -1e-10 * scale);
  }
  // The (lambda, y_i) block is skew: the sampler must report violations.
  const auto rep = check_cocoercive(wp.problem.components()[0], 1.0 / L0, 10000, 6);
  CHECK(rep.violations > 0);
}

TEST_CASE("smoothness constant") {
  SupervisedDataset unit;
  unit.features = Eigen::MatrixXd::Zero(2, 3);
  unit.features(0, 1) = 1.0;
  unit.features(1, 0) = 0.6;
  unit.labels = vec({1, -1});
  CHECK(wdrsl_smoothness_constant(unit, 1.0, 1.0) == Approx(2.0 * std::sqrt(2.0)));
  SupervisedDataset zero;
  zero.features = Eigen::MatrixXd::Zero(2, 3);
  zero.labels = vec({1, 1});
  for (double Lt0 : {0.5, 1.0, 2.0})
    for (double kappa : {0.3, 1.0, 3.0})
      CHECK(wdrsl_smoothness_constant(zero, Lt0, kappa) ==
            Approx(std::sqrt(std::max({3.0 * Lt0 * Lt0, 2.0 * kappa * kappa, kappa * kappa}))));

  // empirical Lipschitz ratio of the full gradient of f_i stays below L0
  const SupervisedDataset data = random_dataset(4, 3, 7);
  GlmSpec spec;
  spec.theta = 0.4;
  const double L0 = wdrsl_smoothness_constant(data, spec.psi.lipschitz, spec.kappa);
  Rng rng = make_stream(7, 7);
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const Point z1 = random_point(7, rng, 3.0);
    Point z2 = random_point(7, rng, 3.0);
    if (t % 2) z2 = z1 + 1e-3 * (z2 - z1);
    const std::size_t i = uniform_index(rng, 4);
    const Point g1 = full_gradient(z1.head(3), z1.tail(4), i, data, spec);
    const Point g2 = full_gradient(z2.head(3), z2.tail(4), i, data, spec);
    worst = std::max(worst, (g1 - g2).norm() / (z1 - z2).norm());
  }
  INFO("empirical " << worst << " vs L0 " << L0);
  CHECK(worst <= L0);
}

TEST_CASE("WDRSL builder") {
  const SupervisedDataset data = random_dataset(5, 3, 8);
  GlmSpec spec;
  const double L0 = wdrsl_smoothness_constant(data, spec.psi.lipschitz, spec.kappa);
  const WdrslProblem wp = build_wdrsl_problem(data, spec, 2.0 / L0);
  CHECK(wp.exact_projection);
  CHECK(wp.L0 == Approx(L0));
  CHECK(wp.problem.size() == 5);
  Rng rng = make_stream(8, 8);
  for (int t = 0; t < 50; ++t) {
    const Point z = random_point(8, rng, 2.0);
    REQUIRE(wp.problem.resolvent().exact(z) == project_xy(z, 3, 1.0));
  }
  const Point z0 = wp.initial_point(spec.psi.lipschitz);
  CHECK(z0[2] == 1.0);
  CHECK(z0.norm() == 1.0);
  CHECK(wp.problem.resolvent().exact(z0) == z0);

  CHECK_THROWS_AS(build_wdrsl_problem(data, spec, 4.0 / L0), UsageError);
  CHECK_THROWS_AS(build_wdrsl_problem(data, spec, 0.0), UsageError);
  GlmSpec bad = spec;
  bad.theta = 0.0;
  CHECK_THROWS_AS(build_wdrsl_problem(data, bad, 1.0 / L0), UsageError);
  SupervisedDataset bad_labels = data;
  bad_labels.labels[0] = 0.0;
  CHECK_THROWS_AS(build_wdrsl_problem(bad_labels, spec, 1.0 / L0), DataError);

  GlmSpec boxed = spec;
  boxed.gamma = box_set(Point::Constant(2, -0.2), Point::Constant(2, 0.2));
  const WdrslProblem wb = build_wdrsl_problem(data, boxed, 1.0 / L0);
  CHECK_FALSE(wb.exact_projection);
  CHECK_FALSE(wb.problem.resolvent().certified());
  const Point p = wb.problem.resolvent().inexact(vec({1.0, -1.0, 0.5, 3, 0, 0, 0, 0}), 1e-9);
  CHECK(p.head(2).cwiseAbs().maxCoeff() <= 0.2 + 1e-8);
  CHECK(p.head(2).norm() <= p[2] / 2.0 + 1e-8);
}

TEST_CASE("residual vanishes at independently computed saddle points") {
  GlmSpec spec;
  spec.kappa = 1.0;

  // Apex solution: w = 0, lambda = 0, y_i = -psi_i Psi'(0); optimal when
  // theta >= kappa (1 - Psi'(0) mean psi).
  {
    SupervisedDataset data;
    data.features.resize(2, 2);
    data.features << 0.5, -1.0, 1.5, 0.2;
    data.labels = vec({1, 1});
    spec.theta = 0.6;
    const double L0 = wdrsl_smoothness_constant(data, 1.0, 1.0);
    const WdrslProblem wp = build_wdrsl_problem(data, spec, 1.0 / L0);
    const Point zs = vec({0, 0, 0, -0.5, -0.5});
    CHECK(residual_exact(wp.problem, zs).norm() <= 1e-12);
  }

  // General case (lambda > 0): projected extragradient run to high accuracy.
  // Small theta can make the problem unbounded, so both radii keep the
  // per-unit-lambda slope positive on the cone.
  for (double theta : {0.2, 0.3}) {
    SupervisedDataset data;
    data.features.resize(3, 2);
    data.features << 1.0, 0.5, -0.3, 0.8, 0.7, -1.1;
    data.labels = vec({1, -1, 1});
    spec.theta = theta;
    const double L0 = wdrsl_smoothness_constant(data, 1.0, 1.0);
    const WdrslProblem wp = build_wdrsl_problem(data, spec, 1.0 / L0);
    auto F = [&](const Point& z) {
      Point out = Point::Zero(z.size());
      for (std::size_t i = 0; i < 3; ++i) out += wdrsl_saddle_component(z, i, data, spec) / 3.0;
      return out;
    };
    const double tau = 0.5 / L0;
    Point z = wp.initial_point(1.0);
    for (int it = 0; it < 400000; ++it) {
      const Point half = project_xy(z - tau * F(z), 3, 1.0);
      const Point next = project_xy(z - tau * F(half), 3, 1.0);
      if ((next - z).norm() <= 1e-15) {
        z = next;
        break;
      }
      z = next;
    }
    INFO("theta " << theta << ", z* = " << z.transpose());
    CHECK(residual_exact(wp.problem, z).norm() <= 1e-6);
  }
}

TEST_CASE("WDRO convex-concave builder") {
  // N = 1, xi^ = 0, theta = 1: Y is the unit ball
  {
    const Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(1, 2);
    const auto spec = bilinear_loss(2, 1.0, euclidean_ball_set(Point::Zero(2), 1.0));
    const WdroCcProblem wp = build_wdro_cc_problem(xi, spec, 1.0);
    CHECK(wp.exact_projection);
    CHECK((wp.y_set.project(vec({3.0, 4.0})) - vec({0.6, 0.8})).norm() <= 1e-15);
    CHECK(wp.y_set.project(vec({0.3, 0.4})) == vec({0.3, 0.4}));
    const Point z = wp.problem.resolvent().exact(vec({0.0, 2.0, 0.0, -5.0}));
    CHECK((z - vec({0.0, 1.0, 0.0, -1.0})).norm() <= 1e-15);
  }

  Rng rng = make_stream(9, 9);
  Eigen::MatrixXd xi(4, 2);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) xi(i, j) = 0.2 * standard_normal(rng);
  const ConvexSet X = euclidean_ball_set(Point::Zero(2), 1.0);

  // support: the xi-gradient of f_i lives in block i
  {
    const WdroCcProblem wp = build_wdro_cc_problem(xi, bilinear_loss(2, 1.0, X), 1.0);
    CHECK(wp.problem.dimension() == 10);
    const Point z = random_point(10, rng);
    for (std::size_t i = 0; i < 4; ++i) {
      const Point F = wp.problem.components()[i](z);
      for (std::size_t b = 0; b < 4; ++b) {
        const double n = F.segment(2 + 2 * static_cast<Eigen::Index>(b), 2).norm();
        if (b == i) REQUIRE(n > 0.0);
        else REQUIRE(n == 0.0);
      }
    }
  }

  // very large theta: same trajectory as leaving y unconstrained
  {
    const WdroCcProblem big = build_wdro_cc_problem(xi, bilinear_loss(2, 1e8, X), 1.0);
    FiniteSumInclusion free_y(Resolvent::from_exact(10,
                                                    [X](const Point& z) {
                                                      Point out = z;
                                                      out.head(2) = X.project(Point(z.head(2)));
                                                      return out;
                                                    }),
                              big.problem.components(), 1.0, 1.0);
    const Point z0 = big.initial_point(xi);
    DriverOptions opt;
    opt.budget = 300;
    const double L = step_constant(1.0, 1.0);
    const IterationTrace a = run_exact(residual_operator(big.problem), z0, L, opt);
    const IterationTrace b = run_exact(residual_operator(free_y), z0, L, opt);
    for (std::size_t k = 0; k < a.rows.size(); ++k)
      REQUIRE(a.rows[k].res_norm == Approx(b.rows[k].res_norm).epsilon(1e-12).margin(1e-15));
  }

  // bilinear loss: F_i monotone (skew); the interior residual equals F and is not co-coercive
  {
    const Eigen::MatrixXd zero_xi = Eigen::MatrixXd::Zero(3, 2);
    const WdroCcProblem wp = build_wdro_cc_problem(zero_xi, bilinear_loss(2, 1.0, X), 1.0);
    const Operator G = residual_operator(wp.problem);
    for (int t = 0; t < 1000; ++t) {
      const Point z1 = random_point(8, rng, 0.1), z2 = random_point(8, rng, 0.1);
      REQUIRE((G(z1) - G(z2)).dot(z1 - z2) >= -1e-12);
      for (const auto& c : wp.problem.components()) REQUIRE((c(z1) - c(z2)).dot(z1 - z2) >= -1e-12);
    }
    CocoercivityOptions small;
    small.radius = 0.1;
    const auto rep = check_cocoercive(G, cocoercivity_modulus(1.0, 1.0), 10000, 3, small);
    CHECK(rep.violations > 0);
  }

  // Xi box: Y becomes a Dykstra composite
  {
    auto spec = bilinear_loss(2, 0.5, X);
    spec.xi_box = std::make_pair(Point::Constant(2, -0.1), Point::Constant(2, 0.1));
    const WdroCcProblem wp = build_wdro_cc_problem(xi, spec, 1.0);
    CHECK_FALSE(wp.exact_projection);
    const Point p = wp.problem.resolvent().inexact(Point::Constant(10, 3.0), 1e-9);
    CHECK(p.tail(8).cwiseAbs().maxCoeff() <= 0.1 + 1e-8);
    CHECK((p.tail(8) - wp.initial_point(xi).tail(8)).norm() <= 2.0 * 0.5 + 1e-8);
  }

  // unsupported combinations
  {
    auto p1 = bilinear_loss(2, 1.0, X);
    p1.p = 1.0;
    CHECK_THROWS_AS(build_wdro_cc_problem(xi, p1, 1.0), UsageError);
    auto other = bilinear_loss(2, 1.0, X);
    other.metric = GroundMetric::other;
    CHECK_THROWS_AS(build_wdro_cc_problem(xi, other, 1.0), UsageError);
    CHECK_THROWS_AS(build_wdro_cc_problem(Eigen::MatrixXd::Zero(2, 3), bilinear_loss(2, 1.0, X), 1.0), DataError);
    CHECK_THROWS_AS(build_wdro_cc_problem(xi, bilinear_loss(2, 1.0, X), 4.0), UsageError);
  }
}

TEST_CASE("growth condition notes") {
  const ConvexSet X = euclidean_ball_set(Point::Zero(2), 1.0);
  const GrowthNote bil = growth_condition_note(bilinear_loss(2, 1.0, X));
  CHECK(bil.verified);
  CHECK(bil.satisfiable);
  CHECK_FALSE(bil.assumption.empty());
  REQUIRE(!bil.warnings.empty());
  CHECK(bil.warnings.front().find("tends to 0") != std::string::npos);

  auto nonconvex = bilinear_loss(2, 1.0, X);
  nonconvex.xi_convex = false;
  const GrowthNote nc = growth_condition_note(nonconvex);
  CHECK(std::any_of(nc.warnings.begin(), nc.warnings.end(),
                    [](const std::string& w) { return w.find("nonconvex") != std::string::npos; }));

  CcLossSpec plain;
  const GrowthNote def = growth_condition_note(plain);
  CHECK_FALSE(def.verified);
  CHECK_FALSE(def.assumption.empty());
  CHECK(def.warnings.size() == 1);

  auto cubic = bilinear_loss(2, 1.0, X);
  cubic.xi_growth_exponent = 3.0;
  const GrowthNote c = growth_condition_note(cubic);
  CHECK(c.verified);
  CHECK_FALSE(c.satisfiable);
}
