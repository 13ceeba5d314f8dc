#pragma once

// Builds the configured problem, runs one trace per seed on a pool of worker
// threads, persists the traces and a per-k aggregate, and certifies the
// rate bound when a reference solution is known.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "halpern/certificates.hpp"
#include "halpern/error.hpp"
#include "halpern/harness/config.hpp"
#include "halpern/harness/dataset.hpp"
#include "halpern/harness/synthetic.hpp"
#include "halpern/harness/trace_io.hpp"
#include "halpern/operator.hpp"
#include "halpern/page.hpp"
#include "halpern/random.hpp"
#include "halpern/solver.hpp"
#include "halpern/wdro.hpp"

namespace halpern::harness {

struct BuiltProblem {
  FiniteSumInclusion problem;
  Point z0;
  std::optional<Point> z_star;
  double L0 = 0.0;
  double L = 0.0;  // 1/c for the forward-backward residual
  double alpha = 0.0;
  double theta = std::numeric_limits<double>::quiet_NaN();
  double kappa = std::numeric_limits<double>::quiet_NaN();
  bool exact_projection = true;
};

namespace detail {

inline double resolve_alpha(double configured, double L0) { return configured > 0.0 ? configured : 2.0 / L0; }

inline FiniteSumInclusion single_component(Operator F, double L0, double alpha) {
  const std::size_t dim = F.dimension();
  std::vector<Operator> comps{std::move(F)};
  return FiniteSumInclusion(Resolvent::identity(dim), std::move(comps), L0, alpha);
}

inline std::pair<Point, Point> parse_xi_box(const std::string& spec, std::size_t dim) {
  const auto parts = split(spec, ',');
  double lo, hi;
  if (parts.size() != 2 || !parse_double(parts[0], lo) || !parse_double(parts[1], hi) || !(lo <= hi))
    throw UsageError("config: problem.xi_box must be 'lo,hi' with lo <= hi");
  return {Point::Constant(static_cast<Eigen::Index>(dim), lo), Point::Constant(static_cast<Eigen::Index>(dim), hi)};
}

}  // namespace detail

/// Instance for one run; `seed` only matters when problem.data_per_seed is set.
inline BuiltProblem build_problem(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto& p = cfg.problem;
  const std::uint64_t data_seed = p.data_per_seed ? seed : p.data_seed;
  if (p.kind == "synthetic-quadratic") {
    SyntheticQuadratic q = synth_quadratic(p.dim, p.cond, data_seed);
    const double L0 = q.L;
    const double alpha = detail::resolve_alpha(cfg.solver.alpha, L0);
    BuiltProblem b{detail::single_component(std::move(q.G), L0, alpha), Point::Zero(static_cast<Eigen::Index>(p.dim)),
                   q.z_star, L0, step_constant(alpha, L0), alpha};
    return b;
  }
  if (p.kind == "raw-cocoercive") {
    const Eigen::MatrixXd mb = ingest_matrix_csv(p.dataset);
    if (mb.cols() != mb.rows() + 1)
      throw DataError(p.dataset + ": raw-cocoercive expects n rows of n+1 columns [M | b]");
    const Eigen::MatrixXd M = mb.leftCols(mb.rows());
    const Eigen::VectorXd rhs = mb.col(mb.cols() - 1);
    const auto dim = static_cast<std::size_t>(M.rows());
    Operator G(dim, [M, rhs](const Point& z, double scale, Point& out) { out.noalias() += scale * (M * z - rhs); });
    const double alpha = detail::resolve_alpha(cfg.solver.alpha, p.L);
    return {detail::single_component(std::move(G), p.L, alpha), Point::Zero(M.rows()), std::nullopt, p.L,
            step_constant(alpha, p.L), alpha};
  }
  if (p.kind == "wdrsl") {
    SupervisedDataset data = p.dataset.empty() ? synth_wdrsl(p.n, p.d, p.separability, data_seed) : ingest_csv(p.dataset);
    GlmSpec spec;
    spec.psi = p.link == "logistic" ? logistic_link() : quadratic_link(p.link_range);
    spec.psi0 = p.ridge > 0.0 ? ridge_regularizer(p.ridge) : zero_regularizer();
    spec.theta = p.theta;
    spec.kappa = p.kappa;
    const double L0 = p.L0 > 0.0 ? p.L0 : wdrsl_smoothness_constant(data, spec.psi.lipschitz, spec.kappa);
    const double alpha = detail::resolve_alpha(cfg.solver.alpha, L0);
    WdrslProblem w = build_wdrsl_problem(data, spec, alpha, L0);
    const Point z0 = w.initial_point(spec.psi.lipschitz);
    BuiltProblem b{std::move(w.problem), z0, std::nullopt, L0, step_constant(alpha, L0), alpha};
    b.theta = p.theta;
    b.kappa = p.kappa;
    b.exact_projection = w.exact_projection;
    return b;
  }
  if (p.kind == "wdro-cc") {
    Eigen::MatrixXd xi_hat;
    if (p.dataset.empty()) {
      if (p.n < 1 || p.d < 1) throw UsageError("config: wdro-cc needs n >= 1 and d >= 1");
      xi_hat.resize(static_cast<Eigen::Index>(p.n), static_cast<Eigen::Index>(p.d));
      Rng rng = make_stream(data_seed, 0x63636461);
      for (Eigen::Index i = 0; i < xi_hat.rows(); ++i)
        for (Eigen::Index j = 0; j < xi_hat.cols(); ++j) xi_hat(i, j) = standard_normal(rng);
    } else {
      xi_hat = ingest_matrix_csv(p.dataset);
    }
    const auto dim = static_cast<std::size_t>(xi_hat.cols());
    CcLossSpec spec = bilinear_loss(dim, p.theta, euclidean_ball_set(Point::Zero(static_cast<Eigen::Index>(dim)), p.x_radius));
    if (p.L0 > 0.0) spec.L0 = p.L0;
    if (!p.xi_box.empty()) spec.xi_box = detail::parse_xi_box(p.xi_box, dim);
    const double alpha = detail::resolve_alpha(cfg.solver.alpha, spec.L0);
    WdroCcProblem w = build_wdro_cc_problem(xi_hat, spec, alpha);
    const Point z0 = w.initial_point(xi_hat);
    BuiltProblem b{std::move(w.problem), z0, std::nullopt, spec.L0, step_constant(alpha, spec.L0), alpha};
    b.theta = p.theta;
    b.exact_projection = w.exact_projection;
    return b;
  }
  throw UsageError("config: unknown problem.kind '" + p.kind + "'");
}

/// Inexact oracle: the residual (exact, or inexact at accuracy gamma) plus an
/// injected error of norm exactly gamma_k. `along`/`against` point along
/// +/- G(z); `random` draws a uniform direction from the substream (seed, k).
inline InexactOracle make_injected_oracle(const FiniteSumInclusion& prob, const std::string& mode, std::uint64_t seed) {
  auto counter = std::make_shared<std::uint64_t>(0);
  return [prob, mode, seed, counter](const Point& z, double gamma) -> Point {
    const std::uint64_t k = (*counter)++;
    Point g = prob.resolvent().has_exact() ? residual_exact(prob, z) : residual_inexact(prob, z, gamma);
    if (mode == "none" || gamma == 0.0) return g;
    Point dir;
    const double gn = g.norm();
    if (mode != "random" && gn > 0.0) {
      dir = (mode == "along" ? 1.0 : -1.0) * g / gn;
    } else {
      Rng rng = make_stream(seed, 0x696e6a, k);
      dir.resize(z.size());
      for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = standard_normal(rng);
      dir /= dir.norm();
    }
    return g + gamma * dir;
  };
}

/// Header shared by all traces of an experiment (config echo and constants).
inline HeaderEntries trace_header(const ExperimentConfig& cfg, const BuiltProblem& b, std::uint64_t seed) {
  HeaderEntries h = cfg.entries();
  h.emplace_back("const.L0", format_double(b.L0));
  h.emplace_back("const.L", format_double(b.L));
  h.emplace_back("const.alpha", format_double(b.alpha));
  h.emplace_back("const.theta", format_double(b.theta));
  h.emplace_back("const.kappa", format_double(b.kappa));
  h.emplace_back("const.N", std::to_string(b.problem.size()));
  h.emplace_back("const.dim", std::to_string(b.problem.dimension()));
  h.emplace_back("info.seed", std::to_string(seed));
  h.emplace_back("info.exact_projection", b.exact_projection ? "true" : "false");
  return h;
}

/// Runs one seed; rows are passed to `on_row` as they are produced.
inline IterationTrace run_single(const ExperimentConfig& cfg, const BuiltProblem& b, std::uint64_t seed,
                                 std::function<void(const IterationRecord&)> on_row = {}) {
  DriverOptions opt;
  opt.budget = static_cast<std::size_t>(cfg.solver.budget);
  opt.target_eps = cfg.solver.target_eps;
  opt.divergence_factor = cfg.solver.divergence_factor;
  opt.evaluation_cost = b.problem.size();
  opt.on_row = std::move(on_row);
  const ToleranceSchedule sched = cfg.tolerance_schedule();
  const auto& prob = b.problem;
  if (cfg.solver.kind == "exact") {
    if (!prob.resolvent().has_exact())
      throw UsageError("solver.kind = exact needs an exact resolvent; use the inexact solver");
    return run_exact(residual_operator(prob), b.z0, b.L, opt);
  }
  if (cfg.solver.kind == "inexact") {
    const InexactOracle oracle = make_injected_oracle(prob, cfg.solver.error_mode, seed);
    if (prob.resolvent().has_exact()) {
      const Operator G = residual_operator(prob);
      return run_inexact(oracle, sched, b.z0, b.L, opt, &G);
    }
    return run_inexact(oracle, sched, b.z0, b.L, opt);
  }
  const std::span<const Operator> comps(prob.components());
  double sigma = cfg.page.sigma;
  if (!(sigma > 0.0)) {
    const std::size_t pilot = cfg.page.pilot_size == 0 ? prob.size() : static_cast<std::size_t>(cfg.page.pilot_size);
    sigma = estimate_sigma(comps, b.z0, pilot, seed);
  }
  PageParameters params = PageParameters::from_schedule(sched, sigma, prob.L0());
  params.cap_multiple = cfg.page.cap_multiple;
  params.full_batch_override = cfg.page.full_batch_override;
  opt.evaluation_cost = 0;
  return run_stochastic(prob, b.z0, params, sched, seed, opt);
}

struct AggregateRow {
  std::size_t k = 0;
  std::size_t count = 0;  // seeds with a row at k
  double mean_res_sq = 0.0;
  double var_res_sq = 0.0;  // unbiased; 0 with a single seed
  double mean_cum_samples = 0.0;
  double mean_samples = 0.0;
};

/// Per-k mean and variance of res_norm^2 across traces, summed in trace order.
inline std::vector<AggregateRow> aggregate(const std::vector<std::vector<IterationRecord>>& traces) {
  std::size_t kmax = 0;
  bool any = false;
  for (const auto& t : traces)
    if (!t.empty()) {
      kmax = std::max(kmax, t.back().k);
      any = true;
    }
  std::vector<AggregateRow> out;
  if (!any) return out;
  for (std::size_t k = 0; k <= kmax; ++k) {
    AggregateRow r;
    r.k = k;
    std::vector<double> vals;
    double cum = 0.0, smp = 0.0;
    for (const auto& t : traces)
      if (k < t.size() && t[k].k == k) {
        const double v = t[k].res_norm * t[k].res_norm;
        vals.push_back(v);
        cum += static_cast<double>(t[k].cum_samples);
        smp += static_cast<double>(t[k].samples);
      }
    if (vals.empty()) continue;
    r.count = vals.size();
    double sum = 0.0;
    for (double v : vals) sum += v;
    r.mean_res_sq = sum / static_cast<double>(r.count);
    if (r.count > 1) {
      double ss = 0.0;
      for (double v : vals) ss += (v - r.mean_res_sq) * (v - r.mean_res_sq);
      r.var_res_sq = ss / static_cast<double>(r.count - 1);
    }
    r.mean_cum_samples = cum / static_cast<double>(r.count);
    r.mean_samples = smp / static_cast<double>(r.count);
    out.push_back(r);
  }
  return out;
}

inline void write_aggregate(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "k,count,mean_res_sq,var_res_sq,mean_samples,mean_cum_samples\n";
  for (const auto& r : rows)
    out << r.k << ',' << r.count << ',' << format_double(r.mean_res_sq) << ',' << format_double(r.var_res_sq) << ','
        << format_double(r.mean_samples) << ',' << format_double(r.mean_cum_samples) << '\n';
}

inline std::vector<AggregateRow> read_aggregate(std::istream& in, const std::string& name = "<stream>") {
  std::vector<AggregateRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = trim(line);
    if (s.empty() || lineno == 1) continue;
    const auto c = split(s, ',');
    AggregateRow r;
    std::uint64_t k, n;
    if (c.size() != 6 || !parse_uint(c[0], k) || !parse_uint(c[1], n) || !parse_double(c[2], r.mean_res_sq) ||
        !parse_double(c[3], r.var_res_sq) || !parse_double(c[4], r.mean_samples) ||
        !parse_double(c[5], r.mean_cum_samples))
      throw DataError(name + ":" + std::to_string(lineno) + ": malformed aggregate row");
    r.k = k;
    r.count = n;
    rows.push_back(r);
  }
  return rows;
}

struct CertificateSummary {
  bool applicable = false;  // reference solution known and certificates valid
  bool pass = true;
  std::string detail;
  std::vector<RateReport> rate;  // per seed (exact/inexact) or one on the seed mean (stochastic)
  std::vector<PotentialReport> potential;
  double max_identity_residual = 0.0;
};

struct ExperimentResult {
  std::vector<std::uint64_t> seeds;
  std::vector<IterationTrace> traces;
  std::vector<std::string> trace_paths;  // empty when not persisted
  std::vector<AggregateRow> aggregate;
  CertificateSummary certificate;
  double L0 = 0.0, L = 0.0, alpha = 0.0;
};

inline std::string trace_filename(std::uint64_t seed) { return "trace_seed" + std::to_string(seed) + ".csv"; }

namespace detail {

inline CertificateSummary certify(const ExperimentConfig& cfg, const std::vector<BuiltProblem>& built,
                                  const std::vector<IterationTrace>& traces, const std::vector<AggregateRow>& agg) {
  CertificateSummary c;
  for (const auto& t : traces) c.max_identity_residual = std::max(c.max_identity_residual, t.max_identity_residual);
  bool have_ref = true;
  for (const auto& b : built) have_ref = have_ref && b.z_star.has_value();
  bool valid = true;
  for (const auto& t : traces) valid = valid && t.certificates_valid;
  const bool mixed = cfg.solver.kind == "stochastic" && cfg.problem.data_per_seed && traces.size() > 1;
  if (!have_ref || !valid || mixed) {
    c.detail = !valid  ? "skipped: parameter override disables certificates"
               : mixed ? "skipped: seed mean over different instances"
                       : "skipped: no reference solution";
    return c;
  }
  c.applicable = true;
  if (cfg.solver.kind == "stochastic") {
    // Expectation bound on the seed mean; data must not vary across seeds.
    const BuiltProblem& b = built.front();
    const double D = (b.z0 - *b.z_star).norm();
    std::vector<double> res_sq, tol;
    for (const auto& r : agg) res_sq.push_back(r.mean_res_sq);
    for (const auto& r : traces.front().rows) tol.push_back(r.gamma + r.sigma);
    c.rate.push_back(rate_certificate(res_sq, {}, b.L, D, tol));
    c.pass = c.rate.back().pass;
  } else {
    for (std::size_t s = 0; s < traces.size(); ++s) {
      const double D = (built[s].z0 - *built[s].z_star).norm();
      c.rate.push_back(rate_certificate(traces[s], built[s].L, D));
      c.pass = c.pass && c.rate.back().all_pass();
      if (!traces[s].potential_approximate) {
        c.potential.push_back(check_potential_inequality(traces[s], built[s].L));
        c.pass = c.pass && c.potential.back().pass();
      }
    }
  }
  if (c.max_identity_residual > 1e-12) c.pass = false;
  c.detail = c.pass ? "pass" : "FAIL";
  return c;
}

}  // namespace detail

/// Runs all seeds. With `persist`, writes <out>/trace_seed<S>.csv for every
/// seed and <out>/aggregate.csv.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, bool persist = true) {
  cfg.validate();
  ExperimentResult res;
  res.seeds = cfg.run.seeds;
  const std::size_t n = res.seeds.size();
  std::vector<std::optional<BuiltProblem>> built(n);
  res.traces.resize(n);
  std::vector<std::exception_ptr> errors(n);
  const std::filesystem::path out_dir(cfg.run.out);
  if (persist) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create output directory '" + cfg.run.out + "': " + ec.message());
    for (auto s : res.seeds) res.trace_paths.push_back((out_dir / trace_filename(s)).string());
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const std::uint64_t seed = res.seeds[i];
        built[i].emplace(build_problem(cfg, seed));
        if (persist) {
          std::ofstream out(res.trace_paths[i]);
          if (!out) throw DataError("cannot write trace '" + res.trace_paths[i] + "'");
          write_header(out, trace_header(cfg, *built[i], seed));
          res.traces[i] = run_single(cfg, *built[i], seed, [&out](const IterationRecord& r) {
            write_row(out, r);
            out.flush();
          });
        } else {
          res.traces[i] = run_single(cfg, *built[i], seed);
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t slots = std::min<std::size_t>(n, static_cast<std::size_t>(cfg.run.workers));
  if (slots <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < slots; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    const std::string ctx = "[problem=" + cfg.problem.kind + " solver=" + cfg.solver.kind +
                            " schedule=" + cfg.tolerance_schedule().label() + " seed=" + std::to_string(res.seeds[i]) + "] ";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const UsageError& e) {
      throw UsageError(ctx + e.what());
    } catch (const DataError& e) {
      throw DataError(ctx + e.what());
    } catch (const std::exception& e) {
      throw SolverError(ctx + e.what());
    }
  }

  std::vector<std::vector<IterationRecord>> rows;
  for (const auto& t : res.traces) rows.push_back(t.rows);
  res.aggregate = aggregate(rows);
  if (persist) {
    std::ofstream out(out_dir / "aggregate.csv");
    if (!out) throw DataError("cannot write aggregate file in '" + cfg.run.out + "'");
    write_aggregate(out, res.aggregate);
  }
  std::vector<BuiltProblem> bs;
  for (auto& b : built) bs.push_back(std::move(*b));
  res.L0 = bs.front().L0;
  res.L = bs.front().L;
  res.alpha = bs.front().alpha;
  res.certificate = detail::certify(cfg, bs, res.traces, res.aggregate);
  return res;
}

}  // namespace halpern::harness
