#pragma once

// Cumulative samples needed by the stochastic iteration to bring the seed-mean
// of ||G(z^k)||^2 below eps^2, over a grid of eps, with a log-log trend fit.

#include <cmath>
#include <filesystem>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "halpern/error.hpp"
#include "halpern/harness/config.hpp"
#include "halpern/harness/experiment.hpp"
#include "halpern/harness/fit_rate.hpp"
#include "halpern/harness/text.hpp"

namespace halpern::harness {

struct ComplexityRow {
  double eps = 0.0;
  bool censored = true;  // target not reached within the budget
  std::size_t k_reached = 0;
  double samples = std::numeric_limits<double>::quiet_NaN();  // seed mean of draws spent to reach z^k
  double final_mean_res_sq = 0.0;
};

struct ComplexityReport {
  std::vector<ComplexityRow> rows;
  double slope = std::numeric_limits<double>::quiet_NaN();  // d log(samples) / d log(1/eps)
  double predicted_slope = 3.0;
  std::size_t fitted = 0;
  bool in_band = false;  // slope within [2, 4]
};

/// First k where the aggregate mean of res_norm^2 is <= eps^2; draws made at
/// row k itself form z~^k and are not counted.
inline ComplexityRow complexity_row(double eps, const std::vector<AggregateRow>& agg) {
  ComplexityRow row;
  row.eps = eps;
  if (!agg.empty()) row.final_mean_res_sq = agg.back().mean_res_sq;
  for (const auto& a : agg)
    if (a.mean_res_sq <= eps * eps) {
      row.censored = false;
      row.k_reached = a.k;
      row.samples = a.mean_cum_samples - a.mean_samples;
      break;
    }
  return row;
}

inline ComplexityReport fit_complexity(std::vector<ComplexityRow> rows) {
  ComplexityReport rep;
  std::vector<double> x, y;
  for (const auto& r : rows)
    if (!r.censored && r.samples > 0.0) {
      x.push_back(std::log(1.0 / r.eps));
      y.push_back(std::log(r.samples));
    }
  rep.rows = std::move(rows);
  rep.fitted = x.size();
  if (x.size() >= 2) {
    rep.slope = fit_log_log(x, y).slope;
    rep.in_band = rep.slope >= 2.0 && rep.slope <= 4.0;
  }
  return rep;
}

/// Runs the stochastic solver with schedule A(eps) for every eps in the grid.
/// Traces go to <out>/eps_<i>/ when `persist` is set.
inline ComplexityReport sample_complexity_report(const ExperimentConfig& base, bool persist = false) {
  if (base.complexity.eps_grid.size() < 3) throw UsageError("sample-complexity: need at least 3 eps values");
  if (base.run.seeds.size() < 10) throw UsageError("sample-complexity: need at least 10 seeds");
  if (base.solver.kind != "stochastic") throw UsageError("sample-complexity: solver.kind must be stochastic");
  if (base.tolerance_schedule().kind() != ToleranceSchedule::Kind::sqrt_decay) throw UsageError("sample-complexity: schedule.kind must be A");
  std::vector<ComplexityRow> rows;
  for (std::size_t i = 0; i < base.complexity.eps_grid.size(); ++i) {
    ExperimentConfig cfg = base;
    cfg.schedule.eps = base.complexity.eps_grid[i];
    cfg.run.out = (std::filesystem::path(base.run.out) / ("eps_" + std::to_string(i))).string();
    const ExperimentResult res = run_experiment(cfg, persist);
    rows.push_back(complexity_row(cfg.schedule.eps, res.aggregate));
  }
  return fit_complexity(std::move(rows));
}

inline void write_complexity(std::ostream& out, const ComplexityReport& rep) {
  out << "eps,censored,k_reached,samples,final_mean_res_sq\n";
  for (const auto& r : rep.rows)
    out << format_double(r.eps) << ',' << (r.censored ? 1 : 0) << ',' << r.k_reached << ',' << format_double(r.samples)
        << ',' << format_double(r.final_mean_res_sq) << '\n';
  out << "# slope = " << format_double(rep.slope) << "\n# predicted_slope = " << format_double(rep.predicted_slope)
      << "\n# fitted = " << rep.fitted << '\n';
}

}  // namespace halpern::harness
