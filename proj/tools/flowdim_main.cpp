// Batch driver: run scenarios, export plot data, list and validate scenario
// files. Exit status 0 iff every certificate in the run passed.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "flowdim/scenario.hpp"

namespace {

std::string default_scenario_dir() {
  if (const char* env = std::getenv("FLOWDIM_SCENARIO_DIR")) return env;
  return "scenarios";
}

void apply_threads(int threads) {
  if (threads <= 0)
    if (const char* env = std::getenv("FLOWDIM_THREADS")) threads = std::atoi(env);
  if (threads > 0) flowdim::set_thread_count(threads);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowdim: certificate pipelines for flow-dimension experiments"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir, report_path, check_name;
  int threads = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;

  auto* run = app.add_subcommand("run", "execute a scenario, write report + artifacts");
  run->add_option("--scenario", scenario_path, "scenario INI file")->required();
  run->add_option("--out", out_dir, "artifact directory");
  run->add_option("--threads", threads, "worker threads (env FLOWDIM_THREADS as fallback)");
  run->add_option("--seed", seed, "override the scenario seed")->each([&](const std::string&) {
    seed_set = true;
  });

  auto* plot = app.add_subcommand("plotdata", "emit (parameter, measured, bound) CSV");
  plot->add_option("report", report_path, "report JSON written by run")->required();
  plot->add_option("check", check_name, "check name (or certificate/check)")->required();
  plot->add_option("--out", out_dir, "output file (default stdout)");

  auto* list = app.add_subcommand("list-scenarios", "list shipped scenario files");
  list->add_option("--scenario", scenario_path, "scenario directory");

  auto* validate = app.add_subcommand("validate", "parse and range-check a scenario file");
  validate->add_option("--scenario", scenario_path, "scenario INI file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      apply_threads(threads);
      auto sc = flowdim::parse_scenario(scenario_path);
      if (seed_set) sc.seed = seed;
      auto rep = flowdim::run_scenario(sc, out_dir);
      if (out_dir.empty()) std::cout << rep.to_json() << "\n";
      if (!rep.all_passed()) {
        std::cerr << "FAIL: " << rep.checks_passed() << "/" << rep.checks_total()
                  << " checks passed";
        for (const auto& s : rep.skipped) std::cerr << "\n  skipped: " << s;
        std::cerr << "\n";
        return 1;
      }
      std::cerr << "PASS: " << rep.checks_total() << " checks\n";
      return 0;
    }
    if (plot->parsed()) {
      std::ifstream in(report_path);
      if (!in) throw flowdim::UsageError("report not readable: " + report_path);
      std::stringstream buf;
      buf << in.rdbuf();
      auto csv = flowdim::plotdata_csv(buf.str(), check_name);
      if (out_dir.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(out_dir);
        out << csv;
      }
      return 0;
    }
    if (list->parsed()) {
      auto dir = scenario_path.empty() ? default_scenario_dir() : scenario_path;
      for (const auto& name : flowdim::list_scenarios(dir)) std::cout << name << "\n";
      return 0;
    }
    if (validate->parsed()) {
      auto sc = flowdim::parse_scenario(scenario_path);
      std::cout << "ok: " << sc.name << " (" << sc.stages.size() << " stages, hash "
                << sc.source_hash << ")\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
