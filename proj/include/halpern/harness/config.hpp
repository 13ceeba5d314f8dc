#pragma once

// Experiment configuration: an INI file with sections [problem], [solver],
// [schedule], [page], [run] and [complexity]. Every field has a default and
// the full field list is echoed into trace headers.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "halpern/error.hpp"
#include "halpern/harness/text.hpp"
#include "halpern/schedule.hpp"

namespace halpern::harness {

struct ExperimentConfig {
  struct Problem {
    std::string kind = "synthetic-quadratic";  // raw-cocoercive | synthetic-quadratic | wdrsl | wdro-cc
    std::string dataset;                        // CSV path; empty = generate
    std::uint64_t n = 200;
    std::uint64_t d = 5;
    double separability = 0.9;
    std::uint64_t data_seed = 1;
    bool data_per_seed = false;  // regenerate the instance from each run seed
    std::uint64_t dim = 20;
    double cond = 100.0;
    double theta = 0.1;
    double kappa = 1.0;
    std::string link = "logistic";  // logistic | quadratic
    double link_range = 10.0;
    double ridge = 0.0;
    double L = 0.0;         // raw-cocoercive: co-coercivity constant of G (required)
    double L0 = 0.0;        // > 0 overrides the analytic smoothness constant
    double x_radius = 1.0;  // wdro-cc: X is the ball of this radius
    std::string xi_box;     // wdro-cc: "lo,hi" per-coordinate bounds; empty = whole space
  } problem;

  struct Solver {
    std::string kind = "exact";  // exact | inexact | stochastic
    double alpha = 0.0;          // 0 = 2/L0
    std::uint64_t budget = 1000;
    double target_eps = 0.0;
    double divergence_factor = 1e6;
    std::string error_mode = "none";  // inexact: none | random | along | against
  } solver;

  struct Schedule {
    std::string kind = "zero";  // zero | A | B
    double eps = 0.01;
    double a = 2.0;
  } schedule;

  struct Page {
    double sigma = 0.0;  // 0 = pilot estimate at z0
    std::uint64_t pilot_size = 0;  // 0 = all components
    double cap_multiple = 10.0;    // <= 0 disables the cap
    bool full_batch_override = false;
  } page;

  struct Run {
    std::vector<std::uint64_t> seeds{1};
    std::string out = "out";
    std::uint64_t workers = 1;
  } run;

  struct Complexity {
    std::vector<double> eps_grid{0.1, 0.05, 0.025};
  } complexity;

  ToleranceSchedule tolerance_schedule() const { return ToleranceSchedule::parse(schedule.kind, schedule.eps, schedule.a); }

  void validate() const;
  std::string to_ini() const;
  std::vector<std::pair<std::string, std::string>> entries() const;  // ("section.key", value)
  void set(const std::string& section, const std::string& key, const std::string& value);

  static ExperimentConfig from_ini(std::istream& in);
  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_entries(const std::vector<std::pair<std::string, std::string>>& kv);
};

namespace detail {

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

inline std::string where(const char* section, const char* key) { return std::string(section) + "." + key; }

template <class Group>
Field make_field(const char* s, const char* k, Group ExperimentConfig::*grp, std::string Group::*mem) {
  return {s, k, [=](const ExperimentConfig& c) { return c.*grp.*mem; },
          [=](ExperimentConfig& c, const std::string& v) { c.*grp.*mem = std::string(trim(v)); }};
}

template <class Group>
Field make_field(const char* s, const char* k, Group ExperimentConfig::*grp, double Group::*mem) {
  return {s, k, [=](const ExperimentConfig& c) { return format_double(c.*grp.*mem); },
          [=](ExperimentConfig& c, const std::string& v) {
            double x;
            if (!parse_double(v, x)) throw UsageError("config: " + where(s, k) + " = '" + v + "' is not a number");
            c.*grp.*mem = x;
          }};
}

template <class Group>
Field make_field(const char* s, const char* k, Group ExperimentConfig::*grp, std::uint64_t Group::*mem) {
  return {s, k, [=](const ExperimentConfig& c) { return std::to_string(c.*grp.*mem); },
          [=](ExperimentConfig& c, const std::string& v) {
            std::uint64_t x;
            if (!parse_uint(v, x))
              throw UsageError("config: " + where(s, k) + " = '" + v + "' is not a nonnegative integer");
            c.*grp.*mem = x;
          }};
}

template <class Group>
Field make_field(const char* s, const char* k, Group ExperimentConfig::*grp, bool Group::*mem) {
  return {s, k, [=](const ExperimentConfig& c) { return std::string(c.*grp.*mem ? "true" : "false"); },
          [=](ExperimentConfig& c, const std::string& v) {
            const auto t = trim(v);
            if (t == "true" || t == "1") c.*grp.*mem = true;
            else if (t == "false" || t == "0") c.*grp.*mem = false;
            else throw UsageError("config: " + where(s, k) + " = '" + v + "' is not a boolean");
          }};
}

/// Seeds as a comma list with optional inclusive ranges: "1,2,5..9".
inline std::vector<std::uint64_t> parse_seed_list(const std::string& v) {
  std::vector<std::uint64_t> out;
  for (auto part : split(v, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    const auto dots = part.find("..");
    std::uint64_t a, b;
    if (dots == std::string_view::npos) {
      if (!parse_uint(part, a)) throw UsageError("config: run.seeds entry '" + std::string(part) + "' is not an integer");
      out.push_back(a);
    } else {
      if (!parse_uint(part.substr(0, dots), a) || !parse_uint(part.substr(dots + 2), b) || b < a)
        throw UsageError("config: run.seeds range '" + std::string(part) + "' is malformed");
      for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
    }
  }
  return out;
}

inline const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = [] {
    std::vector<Field> f{
        make_field("problem", "kind", &C::problem, &C::Problem::kind),
        make_field("problem", "dataset", &C::problem, &C::Problem::dataset),
        make_field("problem", "n", &C::problem, &C::Problem::n),
        make_field("problem", "d", &C::problem, &C::Problem::d),
        make_field("problem", "separability", &C::problem, &C::Problem::separability),
        make_field("problem", "data_seed", &C::problem, &C::Problem::data_seed),
        make_field("problem", "data_per_seed", &C::problem, &C::Problem::data_per_seed),
        make_field("problem", "dim", &C::problem, &C::Problem::dim),
        make_field("problem", "cond", &C::problem, &C::Problem::cond),
        make_field("problem", "theta", &C::problem, &C::Problem::theta),
        make_field("problem", "kappa", &C::problem, &C::Problem::kappa),
        make_field("problem", "link", &C::problem, &C::Problem::link),
        make_field("problem", "link_range", &C::problem, &C::Problem::link_range),
        make_field("problem", "ridge", &C::problem, &C::Problem::ridge),
        make_field("problem", "L", &C::problem, &C::Problem::L),
        make_field("problem", "L0", &C::problem, &C::Problem::L0),
        make_field("problem", "x_radius", &C::problem, &C::Problem::x_radius),
        make_field("problem", "xi_box", &C::problem, &C::Problem::xi_box),
        make_field("solver", "kind", &C::solver, &C::Solver::kind),
        make_field("solver", "alpha", &C::solver, &C::Solver::alpha),
        make_field("solver", "budget", &C::solver, &C::Solver::budget),
        make_field("solver", "target_eps", &C::solver, &C::Solver::target_eps),
        make_field("solver", "divergence_factor", &C::solver, &C::Solver::divergence_factor),
        make_field("solver", "error_mode", &C::solver, &C::Solver::error_mode),
        make_field("schedule", "kind", &C::schedule, &C::Schedule::kind),
        make_field("schedule", "eps", &C::schedule, &C::Schedule::eps),
        make_field("schedule", "a", &C::schedule, &C::Schedule::a),
        make_field("page", "sigma", &C::page, &C::Page::sigma),
        make_field("page", "pilot_size", &C::page, &C::Page::pilot_size),
        make_field("page", "cap_multiple", &C::page, &C::Page::cap_multiple),
        make_field("page", "full_batch_override", &C::page, &C::Page::full_batch_override),
    };
    f.push_back({"run", "seeds",
                 [](const C& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.run.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.run.seeds[i]);
                   return s;
                 },
                 [](C& c, const std::string& v) { c.run.seeds = parse_seed_list(v); }});
    f.push_back(make_field("run", "out", &C::run, &C::Run::out));
    f.push_back(make_field("run", "workers", &C::run, &C::Run::workers));
    f.push_back({"complexity", "eps_grid",
                 [](const C& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.complexity.eps_grid.size(); ++i)
                     s += (i ? "," : "") + format_double(c.complexity.eps_grid[i]);
                   return s;
                 },
                 [](C& c, const std::string& v) {
                   c.complexity.eps_grid.clear();
                   for (auto part : split(v, ',')) {
                     if (trim(part).empty()) continue;
                     double x;
                     if (!parse_double(part, x))
                       throw UsageError("config: complexity.eps_grid entry '" + std::string(part) + "' is not a number");
                     c.complexity.eps_grid.push_back(x);
                   }
                 }});
    return f;
  }();
  return table;
}

}  // namespace detail

inline void ExperimentConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  for (const auto& f : detail::fields())
    if (section == f.section && key == f.key) {
      f.set(*this, value);
      return;
    }
  throw UsageError("config: unknown key " + section + "." + key);
}

inline std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : detail::fields()) out.emplace_back(detail::where(f.section, f.key), f.get(*this));
  return out;
}

inline std::string ExperimentConfig::to_ini() const {
  std::ostringstream os;
  std::string current;
  for (const auto& f : detail::fields()) {
    if (current != f.section) {
      if (!current.empty()) os << '\n';
      current = f.section;
      os << '[' << current << "]\n";
    }
    os << f.key << " = " << f.get(*this) << '\n';
  }
  return os.str();
}

inline void ExperimentConfig::validate() const {
  static const std::set<std::string> problems{"raw-cocoercive", "synthetic-quadratic", "wdrsl", "wdro-cc"};
  static const std::set<std::string> solvers{"exact", "inexact", "stochastic"};
  static const std::set<std::string> modes{"none", "random", "along", "against"};
  if (!problems.count(problem.kind)) throw UsageError("config: unknown problem.kind '" + problem.kind + "'");
  if (!solvers.count(solver.kind)) throw UsageError("config: unknown solver.kind '" + solver.kind + "'");
  if (!modes.count(solver.error_mode)) throw UsageError("config: unknown solver.error_mode '" + solver.error_mode + "'");
  if (solver.budget < 1) throw UsageError("config: solver.budget must be >= 1");
  if (solver.alpha < 0.0) throw UsageError("config: solver.alpha must be >= 0 (0 selects 2/L0)");
  if (!(solver.divergence_factor > 1.0)) throw UsageError("config: solver.divergence_factor must exceed 1");
  if (solver.target_eps < 0.0) throw UsageError("config: solver.target_eps must be >= 0");
  (void)tolerance_schedule();  // throws on invalid schedule parameters
  if (run.seeds.empty()) throw UsageError("config: run.seeds is empty");
  if (run.workers < 1) throw UsageError("config: run.workers must be >= 1");
  if (problem.kind == "synthetic-quadratic" && (problem.dim < 1 || !(problem.cond >= 1.0)))
    throw UsageError("config: synthetic-quadratic needs dim >= 1 and cond >= 1");
  if (problem.kind == "raw-cocoercive" && problem.dataset.empty())
    throw UsageError("config: raw-cocoercive needs problem.dataset (rows of [M | b])");
  if (problem.kind == "raw-cocoercive" && !(problem.L > 0.0))
    throw UsageError("config: raw-cocoercive needs problem.L > 0");
  if ((problem.kind == "wdrsl" || problem.kind == "wdro-cc") && problem.dataset.empty() && (problem.n < 1 || problem.d < 2))
    throw UsageError("config: generated data needs n >= 1 and d >= 2");
  if (problem.link != "logistic" && problem.link != "quadratic")
    throw UsageError("config: unknown problem.link '" + problem.link + "'");
  if (!(problem.separability >= 0.0 && problem.separability <= 1.0))
    throw UsageError("config: problem.separability must lie in [0, 1]");
  if (page.sigma < 0.0) throw UsageError("config: page.sigma must be >= 0");
  for (double e : complexity.eps_grid)
    if (!(e > 0.0)) throw UsageError("config: complexity.eps_grid entries must be positive");
}

inline ExperimentConfig ExperimentConfig::from_ini(std::istream& in) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  ExperimentConfig cfg;
  for (const auto& [section, body] : pt) {
    if (!body.data().empty()) throw UsageError("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) cfg.set(section, key, value.data());
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("config: cannot open '" + path + "'");
  ExperimentConfig cfg = from_ini(in);
  // Relative dataset paths are taken relative to the config file.
  if (!cfg.problem.dataset.empty()) {
    const std::filesystem::path data(cfg.problem.dataset);
    if (data.is_relative()) cfg.problem.dataset = (std::filesystem::path(path).parent_path() / data).lexically_normal().string();
  }
  return cfg;
}

inline ExperimentConfig ExperimentConfig::from_entries(const std::vector<std::pair<std::string, std::string>>& kv) {
  ExperimentConfig cfg;
  for (const auto& [name, value] : kv) {
    const auto dot = name.find('.');
    if (dot == std::string::npos) throw UsageError("config: malformed key '" + name + "'");
    cfg.set(name.substr(0, dot), name.substr(dot + 1), value);
  }
  cfg.validate();
  return cfg;
}

}  // namespace halpern::harness
