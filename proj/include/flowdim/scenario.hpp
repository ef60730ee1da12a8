#pragma once
// Batch front-end: INI scenario files, stage orchestration, JSON reports, and
// plot-data export. Reports are deterministic for a fixed scenario and seed.

#include <cstdint>

#include "flowdim/crossprod.hpp"

namespace flowdim {

struct ScenarioStage {
  std::string name;  // section header [stage <name>]
  std::string kind;
  std::map<std::string, std::string> params;
  std::vector<std::string> needs;  // earlier stage names this one consumes
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  FlowSpec flow;
  int grid_n = 0;      // samples per chart axis
  double grid_dt = 0;  // time step for quadratures/probes
  double span = 0;     // hull leaf half-span (TilingHull only)
  std::vector<ScenarioStage> stages;
  std::string source_hash;  // FNV-1a of the file bytes, hex
};

// Parses and range-checks an INI scenario file. Diagnostics name the offending
// line and field.
Scenario parse_scenario(const std::string& path);

struct Report {
  std::string scenario_name;
  std::string scenario_hash;
  std::uint64_t seed = 0;
  std::map<std::string, double> grid;
  std::vector<Certificate> certs;
  std::vector<std::string> skipped;  // stages aborted by failed dependencies

  bool all_passed() const;
  int checks_total() const;
  int checks_passed() const;
  double max_residual() const;  // max over checks of measured - bound
  std::string to_json() const;  // stable key order, no timestamps
};

// Executes the stages in declaration order; a throwing stage records a failed
// certificate and aborts its dependents only. Artifacts (CSV fields, covers)
// land under out_dir when it is nonempty.
Report run_scenario(const Scenario& sc, const std::string& out_dir = "");

// (parameter, measured, bound) rows of the named check's series from a report
// JSON document; checks without a series emit one row with parameter 0.
// Unknown check -> UsageError.
std::string plotdata_csv(const std::string& report_json, const std::string& check_name);

// *.ini files (sorted) in a scenario directory.
std::vector<std::string> list_scenarios(const std::string& dir);

}  // namespace flowdim
