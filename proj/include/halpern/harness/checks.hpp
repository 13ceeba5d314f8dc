#pragma once

// Quick invariant suite behind `halpern check`.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "halpern/certificates.hpp"
#include "halpern/harness/fit_rate.hpp"
#include "halpern/harness/synthetic.hpp"
#include "halpern/operator.hpp"
#include "halpern/page.hpp"
#include "halpern/projections.hpp"
#include "halpern/solver.hpp"

namespace halpern::harness {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

inline std::vector<CheckResult> run_invariant_suite(std::uint64_t seed = 1, std::size_t budget = 2000) {
  std::vector<CheckResult> out;
  auto add = [&](std::string name, bool pass, const std::string& detail) { out.push_back({std::move(name), pass, detail}); };
  const SyntheticQuadratic q = synth_quadratic(10, 50.0, seed);
  const Point z0 = Point::Zero(10);
  const double D = (z0 - q.z_star).norm();

  {
    const CocoercivityReport r = check_cocoercive(q.G, 1.0 / q.L, 2000, seed);
    std::ostringstream os;
    os << r.violations << " violations in " << r.pairs << " pairs";
    add("cocoercive-quadratic-gradient", r.violations == 0, os.str());
  }
  {
    // Forward-backward residual over a box with co-coercive components.
    std::vector<Operator> comps;
    for (std::uint64_t i = 0; i < 4; ++i) comps.push_back(synth_quadratic(10, 10.0, seed + 100 + i).G);
    const Point lo = Point::Constant(10, -0.5), hi = Point::Constant(10, 0.5);
    const double L0 = 1.0, alpha = 1.5;
    FiniteSumInclusion prob(Resolvent::from_exact(10, [lo, hi](const Point& x) { return project_box(lo, hi, x); }),
                            comps, L0, alpha);
    const CocoercivityReport r = check_cocoercive(residual_operator(prob), cocoercivity_modulus(alpha, L0), 2000, seed);
    std::ostringstream os;
    os << r.violations << " violations in " << r.pairs << " pairs";
    add("cocoercive-forward-backward-residual", r.violations == 0, os.str());
  }
  {
    DriverOptions opt;
    opt.budget = budget;
    const IterationTrace t = run_exact(q.G, z0, q.L, opt);
    const RateReport rate = rate_certificate(t, q.L, D);
    const PotentialReport pot = check_potential_inequality(t, q.L);
    std::ostringstream os;
    os << "rate margin " << rate.margin << ", potential violations " << pot.violations << ", identity residual "
       << t.max_identity_residual;
    add("exact-rate-potential-identities", rate.all_pass() && pot.pass() && t.max_identity_residual <= 1e-12, os.str());
    const RateFit fit = fit_rate(t.rows, 10);
    std::ostringstream fs;
    fs << "slope " << fit.slope;
    add("exact-rate-fit", fit.pass, fs.str());
  }
  {
    DriverOptions opt;
    opt.budget = budget;
    const ToleranceSchedule sched = ToleranceSchedule::power_decay(2.0);
    const Operator& G = q.G;
    InexactOracle oracle = [&G](const Point& z, double gamma) {
      Point g = G(z);
      const double n = g.norm();
      return n > 0.0 ? Point(g - gamma * g / n) : g;
    };
    const IterationTrace t = run_inexact(oracle, sched, z0, q.L, opt, &G);
    const RateReport rate = rate_certificate(t, q.L, D);
    const PotentialReport pot = check_potential_inequality(t, q.L);
    std::ostringstream os;
    os << "rate margin " << rate.margin << ", potential violations " << pot.violations;
    add("inexact-rate-potential", rate.all_pass() && pot.pass() && t.max_identity_residual <= 1e-12, os.str());
  }
  {
    Rng rng = make_stream(seed, 0x636b);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
      Point x(4);
      for (Eigen::Index i = 0; i < 4; ++i) x[i] = 3.0 * standard_normal(rng);
      const Point p = project_icecream(x, 1.0);
      const Point pp = project_icecream(p, 1.0);
      worst = std::max(worst, (p - pp).norm());
      const double s = 1.0 / 2.0;
      worst = std::max(worst, std::max(0.0, p.head(3).norm() - s * p[3]));
    }
    std::ostringstream os;
    os << "worst idempotence/feasibility defect " << worst;
    add("icecream-projection", worst <= 1e-12, os.str());
  }
  return out;
}

}  // namespace halpern::harness
