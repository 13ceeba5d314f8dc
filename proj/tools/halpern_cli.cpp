// halpern: run experiments, fit rates, sweep sample complexity, check invariants.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 solver fatal, 4 certificate failure.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "halpern/harness/checks.hpp"
#include "halpern/harness/config.hpp"
#include "halpern/harness/experiment.hpp"
#include "halpern/harness/fit_rate.hpp"
#include "halpern/harness/sample_complexity.hpp"
#include "halpern/harness/trace_io.hpp"

namespace {

using namespace halpern;
using namespace halpern::harness;

enum Exit : int { kOk = 0, kUsage = 1, kData = 2, kSolver = 3, kCertificate = 4 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::uint64_t> budget;
  bool quiet = false;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(c.config);
  if (c.seed) cfg.run.seeds = {*c.seed};
  if (c.out) cfg.run.out = *c.out;
  if (c.budget) cfg.solver.budget = *c.budget;
  cfg.validate();
  return cfg;
}

int cmd_run(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const ExperimentResult res = run_experiment(cfg, true);
  if (!c.quiet) {
    std::cout << "problem " << cfg.problem.kind << ", solver " << cfg.solver.kind << ", schedule "
              << cfg.tolerance_schedule().label() << "\n";
    std::cout << "L0 = " << res.L0 << ", L = " << res.L << ", alpha = " << res.alpha << "\n";
    for (std::size_t i = 0; i < res.seeds.size(); ++i) {
      const auto& t = res.traces[i];
      std::cout << "seed " << res.seeds[i] << ": " << t.rows.size() << " rows, final res_norm "
                << (t.rows.empty() ? 0.0 : t.rows.back().res_norm) << ", stop " << to_string(t.stop.reason);
      if (t.page_capped_events) std::cout << ", warning: " << t.page_capped_events << " capped PAGE batches";
      std::cout << "\n";
    }
    std::cout << "traces and aggregate.csv written to " << cfg.run.out << "\n";
    std::cout << "certificate: " << res.certificate.detail << "\n";
  }
  return res.certificate.applicable && !res.certificate.pass ? kCertificate : kOk;
}

int cmd_fit_rate(const std::string& trace_path, std::size_t k_min, bool quiet) {
  const TraceFile t = read_trace(trace_path);
  const RateFit f = fit_rate(t.rows, k_min);
  if (!quiet) {
    if (f.converged_exactly) {
      std::cout << "converged exactly: all residuals at k >= " << k_min << " are zero\n";
    } else {
      std::cout << "slope " << f.slope << "  intercept " << f.intercept << "  r2 " << f.r2 << "  rows " << f.used
                << "  " << (f.pass ? "pass" : "FAIL") << " (slope <= -0.9)\n";
    }
  }
  return f.pass ? kOk : kCertificate;
}

int cmd_complexity(const Common& c) {
  ExperimentConfig cfg = load(c);
  const ComplexityReport rep = sample_complexity_report(cfg, true);
  const std::filesystem::path path = std::filesystem::path(cfg.run.out) / "complexity.csv";
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_complexity(out, rep);
  if (!c.quiet) {
    write_complexity(std::cout, rep);
    if (!rep.in_band) std::cout << "warning: slope outside [2, 4]\n";
  }
  return kOk;
}

int cmd_check(const Common& c) {
  const std::uint64_t seed = c.seed.value_or(1);
  const std::size_t budget = c.budget ? static_cast<std::size_t>(*c.budget) : 2000;
  bool ok = true;
  for (const auto& r : run_invariant_suite(seed, budget)) {
    ok = ok && r.pass;
    if (!c.quiet || !r.pass) std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
  }
  return ok ? kOk : kCertificate;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment configuration (INI)");
  app->add_option("--seed", c.seed, "run a single seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--budget", c.budget, "iteration budget K")->check(CLI::PositiveNumber);
  app->add_flag("--quiet", c.quiet, "suppress the summary");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Halpern iteration experiments"};
  app.require_subcommand(1);

  Common run_opts, cx_opts, check_opts;
  auto* run = app.add_subcommand("run", "run an experiment and write traces");
  add_common(run, run_opts);
  run->get_option("--config")->required();

  std::string trace_path;
  std::size_t k_min = 10;
  bool fit_quiet = false;
  auto* fit = app.add_subcommand("fit-rate", "fit log(res_norm) against log(k) on a trace file");
  fit->add_option("trace", trace_path, "trace file")->required();
  fit->add_option("--k-min", k_min, "first k used in the fit");
  fit->add_flag("--quiet", fit_quiet);

  auto* cx = app.add_subcommand("sample-complexity", "samples-to-target over complexity.eps_grid");
  add_common(cx, cx_opts);
  cx->get_option("--config")->required();

  auto* check = app.add_subcommand("check", "run the invariant suite");
  add_common(check, check_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*fit) return cmd_fit_rate(trace_path, k_min, fit_quiet);
    if (*cx) return cmd_complexity(cx_opts);
    if (*check) return cmd_check(check_opts);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::usage: return kUsage;
      case ErrorKind::data: return kData;
      case ErrorKind::solver: return kSolver;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolver;
  }
  return kUsage;
}
