#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "halpern/operator.hpp"
#include "halpern/projections.hpp"
#include "halpern/random.hpp"

using namespace halpern;
using Catch::Approx;

namespace {

Point vec(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

Operator linear(const Eigen::MatrixXd& A, const Point& b) {
  return Operator(static_cast<std::size_t>(A.rows()),
                  [A, b](const Point& z, double s, Point& out) { out.noalias() += s * (A * z - b); });
}

Eigen::MatrixXd random_psd(Eigen::Index n, Rng& rng) {
  Eigen::MatrixXd B(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) B(i, j) = standard_normal(rng);
  return B.transpose() * B / static_cast<double>(n);
}

}  // namespace

TEST_CASE("identity resolvent collapses the residual to the mean operator") {
  std::vector<Operator> comps{Operator::from_map(1, [](const Point& z) { return z; })};
  FiniteSumInclusion prob(Resolvent::identity(1), comps, 1.0, 1.0);
  const Point z = vec({3.25});
  CHECK(residual_exact(prob, z)[0] == Approx(3.25));

  Rng rng = make_stream(11, 1);
  std::vector<Operator> many;
  for (int i = 0; i < 5; ++i) many.push_back(linear(random_psd(3, rng), vec({1.0 * i, -1.0, 0.5})));
  FiniteSumInclusion p2(Resolvent::identity(3), many, 10.0, 0.1);
  const Point x = vec({0.3, -1.2, 2.0});
  Point naive = Point::Zero(3);
  for (const auto& c : many) naive += c(x);
  naive /= 5.0;
  CHECK((residual_exact(p2, x) - naive).norm() <= 1e-14 * naive.norm());
}

TEST_CASE("residual vanishes at a root") {
  const Point zs = vec({1.0, -2.0});
  Eigen::MatrixXd A(2, 2);
  A << 2, 1, 1, 3;
  std::vector<Operator> comps{linear(A, A * zs)};
  FiniteSumInclusion prob(Resolvent::identity(2), comps, 4.0, 0.5);
  CHECK(residual_exact(prob, zs).norm() <= 1e-14);
}

TEST_CASE("one-dimensional projected residual") {
  // J = projection onto [0, inf), F(z) = z - 2, alpha = 1, z = 1.
  auto proj = [](const Point& x) { return Point(x.cwiseMax(0.0)); };
  std::vector<Operator> comps{Operator::from_map(1, [](const Point& z) { return Point(z.array() - 2.0); })};
  FiniteSumInclusion prob(Resolvent::from_exact(1, proj), comps, 1.0, 1.0);
  const double g = residual_exact(prob, vec({1.0}))[0];
  // scalar oracle: (z - max(0, z - a(z - 2))) / a
  const double z = 1.0, a = 1.0;
  const double oracle = (z - std::max(0.0, z - a * (z - 2.0))) / a;
  CHECK(g == Approx(oracle));
  CHECK(g == Approx(-1.0));
}

TEST_CASE("inexact residual with zero tolerance equals the exact one") {
  Rng rng = make_stream(3, 3);
  const Eigen::MatrixXd A = random_psd(4, rng);
  const Point lo = Point::Constant(4, -0.3), hi = Point::Constant(4, 0.4);
  std::vector<Operator> comps{linear(A, vec({1, 2, 3, 4}))};
  FiniteSumInclusion prob(Resolvent::from_exact(4, [lo, hi](const Point& x) { return project_box(lo, hi, x); }), comps,
                          A.norm(), 1.0 / A.norm());
  const Point z = vec({0.1, 0.9, -2, 0.0});
  CHECK(residual_inexact(prob, z, 0.0) == residual_exact(prob, z));
}

TEST_CASE("adversarial resolvent error moves the residual by exactly gamma") {
  auto proj = [](const Point& x) { return Point(x.cwiseMax(0.0)); };
  const double alpha = 1.0;
  // Oracle returns J(x) + acc * u with a fixed unit u; acc = alpha * gamma.
  auto perturbed = [proj](const Point& x, double acc) { return Point(proj(x).array() + acc); };
  std::vector<Operator> comps{Operator::from_map(1, [](const Point& z) { return Point(z.array() - 2.0); })};
  FiniteSumInclusion prob(Resolvent::with_inexact(1, proj, perturbed, true), comps, 1.0, alpha);
  const Point z = vec({1.0});
  const Point g = residual_exact(prob, z);
  for (double gamma : {0.1, 0.03, 1e-4}) {
    const Point zt = residual_inexact(prob, z, gamma);
    CHECK((zt - g).norm() == Approx(gamma).epsilon(1e-9));
    CHECK(std::abs(zt[0] - (-1.0)) <= 0.1 + 1e-15);
  }
}

TEST_CASE("inexact oracle failures are fatal and carry the tolerance") {
  auto failing = [](const Point&, double) -> Point { throw SolverError("cannot certify"); };
  std::vector<Operator> comps{Operator::from_map(2, [](const Point& z) { return z; })};
  FiniteSumInclusion prob(Resolvent::from_inexact(2, failing, false), comps, 1.0, 1.0);
  try {
    residual_inexact(prob, vec({1, 1}), 0.125);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(std::string(e.what()).find("0.125") != std::string::npos);
  }
  CHECK_THROWS_AS(residual_exact(prob, vec({1, 1})), UsageError);
  CHECK_THROWS_AS(residual_inexact(prob, vec({1, 1}), 0.0), SolverError);
}

TEST_CASE("problem construction validates its invariants") {
  std::vector<Operator> comps{Operator::from_map(2, [](const Point& z) { return z; })};
  CHECK_THROWS_AS(FiniteSumInclusion(Resolvent::identity(2), {}, 1.0, 1.0), UsageError);
  CHECK_THROWS_AS(FiniteSumInclusion(Resolvent::identity(2), comps, 1.0, 4.0), UsageError);
  CHECK_THROWS_AS(FiniteSumInclusion(Resolvent::identity(2), comps, 1.0, 0.0), UsageError);
  CHECK_THROWS_AS(FiniteSumInclusion(Resolvent::identity(2), comps, -1.0, 1.0), UsageError);
  CHECK_THROWS_AS(FiniteSumInclusion(Resolvent::identity(3), comps, 1.0, 1.0), UsageError);
  comps.push_back(Operator::from_map(3, [](const Point& z) { return z; }));
  CHECK_THROWS_AS(FiniteSumInclusion(Resolvent::identity(2), comps, 1.0, 1.0), UsageError);
  FiniteSumInclusion ok(Resolvent::identity(2), {comps.front()}, 1.0, 1.0);
  CHECK_THROWS_AS(residual_exact(ok, vec({1, 2, 3})), UsageError);
}

TEST_CASE("co-coercivity modulus") {
  CHECK(cocoercivity_modulus(2.0, 1.0) == Approx(1.0));
  CHECK(cocoercivity_modulus(1.0, 1.0) == Approx(0.75));
  for (double L0 : {0.3, 1.0, 7.5}) {
    CHECK(cocoercivity_modulus(2.0 / L0, L0) == Approx(1.0 / L0));
    // 2/L0 maximizes the modulus over the admissible range
    for (double t : {0.1, 0.5, 0.99, 1.01, 1.5, 1.9})
      CHECK(cocoercivity_modulus(t * 2.0 / L0, L0) <= 1.0 / L0 + 1e-15);
    CHECK(step_constant(2.0 / L0, L0) == Approx(L0));
  }
  CHECK_THROWS_AS(cocoercivity_modulus(4.0, 1.0), UsageError);
  CHECK_THROWS_AS(cocoercivity_modulus(0.0, 1.0), UsageError);
}

TEST_CASE("co-coercivity sampler on reference operators") {
  const Operator id = Operator::from_map(3, [](const Point& z) { return z; });
  CHECK(check_cocoercive(id, 1.0, 2000, 1).violations == 0);
  const Operator constant = Operator::from_map(3, [](const Point&) { return Point(Point::Constant(3, 4.0)); });
  CHECK(check_cocoercive(constant, 123.0, 2000, 1).violations == 0);

  Rng rng = make_stream(5, 5);
  Eigen::MatrixXd A(4, 4);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) A(i, j) = standard_normal(rng);
  // gradient of 0.5 ||A z||^2
  const Eigen::MatrixXd H = A.transpose() * A;
  const Operator grad = linear(H, Point::Zero(4));
  const double opnorm = Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues()[0];
  CHECK(check_cocoercive(grad, 1.0 / (opnorm * opnorm), 10000, 2).violations == 0);
  // a modulus twice too large must be caught
  CHECK(check_cocoercive(grad, 2.0 / (opnorm * opnorm), 10000, 2).violations > 0);

  // rotation: monotone but not co-coercive
  Eigen::MatrixXd R(2, 2);
  R << 0, 1, -1, 0;
  CHECK(check_cocoercive(linear(R, Point::Zero(2)), 1e-3, 100, 3).violations > 0);
}

TEST_CASE("forward-backward residual is co-coercive with the modulus") {
  Rng rng = make_stream(9, 9);
  std::vector<Operator> comps;
  double L0 = 0.0;
  for (int i = 0; i < 6; ++i) {
    const Eigen::MatrixXd H = random_psd(5, rng);
    L0 = std::max(L0, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().maxCoeff());
    Point b(5);
    for (Eigen::Index j = 0; j < 5; ++j) b[j] = standard_normal(rng);
    comps.push_back(linear(H, b));
  }
  const Point lo = Point::Constant(5, -0.5), hi = Point::Constant(5, 1.0);
  const Resolvent J = Resolvent::from_exact(5, [lo, hi](const Point& x) { return project_box(lo, hi, x); });
  for (double t : {0.5, 1.0, 1.7}) {
    const double alpha = t / L0;
    FiniteSumInclusion prob(J, comps, L0, alpha);
    const auto rep = check_cocoercive(residual_operator(prob), cocoercivity_modulus(alpha, L0), 10000, 4);
    CHECK(rep.violations == 0);
  }
}

TEST_CASE("exact resolvents are firmly nonexpansive") {
  Rng rng = make_stream(21, 0);
  const Point lo = Point::Constant(4, -1.0), hi = Point::Constant(4, 0.5);
  const Point c = Point::Constant(4, 0.2);
  std::vector<Resolvent> js{
      Resolvent::from_exact(4, [lo, hi](const Point& x) { return project_box(lo, hi, x); }),
      Resolvent::from_exact(4, [c](const Point& x) { return project_euclidean_ball(c, 0.7, x); }),
      Resolvent::from_exact(4, [](const Point& x) { return project_icecream(x, 1.0); }),
      Resolvent::from_exact(4, [](const Point& x) { return project_linf_ball(x); }),
  };
  for (const auto& J : js) {
    for (int t = 0; t < 1000; ++t) {
      Point x(4), y(4);
      for (Eigen::Index i = 0; i < 4; ++i) {
        x[i] = 2.0 * standard_normal(rng);
        y[i] = 2.0 * standard_normal(rng);
      }
      const Point d = J.exact(x) - J.exact(y);
      REQUIRE(d.dot(x - y) >= d.squaredNorm() - 1e-12 * (1.0 + (x - y).squaredNorm()));
    }
  }
}
