#pragma once

// Trace files: a block of "# key = value" header lines followed by a CSV
// table with columns k,res_norm,step_norm,potential,gamma_k,sigma_k,samples,cum_samples.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "halpern/error.hpp"
#include "halpern/harness/config.hpp"
#include "halpern/harness/text.hpp"
#include "halpern/trace.hpp"

namespace halpern::harness {

inline constexpr const char* kTraceColumns = "k,res_norm,step_norm,potential,gamma_k,sigma_k,samples,cum_samples";

using HeaderEntries = std::vector<std::pair<std::string, std::string>>;

struct TraceFile {
  HeaderEntries header;
  std::vector<IterationRecord> rows;

  std::optional<std::string> lookup(const std::string& key) const {
    for (const auto& [k, v] : header)
      if (k == key) return v;
    return std::nullopt;
  }

  /// Configuration echoed in the header.
  ExperimentConfig config() const {
    static const std::vector<std::string> sections{"problem.", "solver.", "schedule.", "page.", "run.", "complexity."};
    HeaderEntries kv;
    for (const auto& e : header)
      for (const auto& s : sections)
        if (e.first.rfind(s, 0) == 0) kv.push_back(e);
    return ExperimentConfig::from_entries(kv);
  }
};

inline void write_header(std::ostream& out, const HeaderEntries& header) {
  for (const auto& [k, v] : header) out << "# " << k << " = " << v << '\n';
  out << kTraceColumns << '\n';
}

inline void write_row(std::ostream& out, const IterationRecord& r) {
  out << r.k << ',' << format_double(r.res_norm) << ',' << format_double(r.step_norm) << ','
      << format_double(r.potential) << ',' << format_double(r.gamma) << ',' << format_double(r.sigma) << ','
      << r.samples << ',' << r.cum_samples << '\n';
}

inline void write_trace(std::ostream& out, const TraceFile& trace) {
  write_header(out, trace.header);
  for (const auto& r : trace.rows) write_row(out, r);
}

inline TraceFile read_trace(std::istream& in, const std::string& name = "<stream>") {
  TraceFile t;
  std::string line;
  std::size_t lineno = 0;
  bool columns_seen = false;
  auto fail = [&](const std::string& msg) {
    std::ostringstream os;
    os << name << ':' << lineno << ": " << msg;
    throw DataError(os.str());
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = trim(line);
    if (s.empty()) continue;
    if (s.front() == '#') {
      if (columns_seen) fail("header line after the column row");
      const auto body = trim(s.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) fail("header line without '='");
      t.header.emplace_back(std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))));
      continue;
    }
    if (!columns_seen) {
      if (s != kTraceColumns) fail("unexpected column row");
      columns_seen = true;
      continue;
    }
    const auto cells = split(s, ',');
    if (cells.size() != 8) fail("expected 8 columns");
    IterationRecord r;
    std::uint64_t k, samples, cum;
    if (!parse_uint(cells[0], k) || !parse_double(cells[1], r.res_norm) || !parse_double(cells[2], r.step_norm) ||
        !parse_double(cells[3], r.potential) || !parse_double(cells[4], r.gamma) || !parse_double(cells[5], r.sigma) ||
        !parse_uint(cells[6], samples) || !parse_uint(cells[7], cum))
      fail("malformed row");
    r.k = k;
    r.samples = samples;
    r.cum_samples = cum;
    if (!t.rows.empty() && r.k <= t.rows.back().k) fail("k is not strictly increasing");
    t.rows.push_back(r);
  }
  if (!columns_seen) throw DataError(name + ": no trace table found");
  return t;
}

inline TraceFile read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace '" + path + "'");
  return read_trace(in, path);
}

inline void write_trace(const std::string& path, const TraceFile& trace) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write trace '" + path + "'");
  write_trace(out, trace);
}

}  // namespace halpern::harness
