#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "flowdim/scenario.hpp"

using namespace flowdim;

namespace {

std::string cli_path() {
  const char* p = std::getenv("FLOWDIM_CLI");
  REQUIRE_MESSAGE(p != nullptr, "FLOWDIM_CLI must point at the built binary");
  return p;
}

std::string scenario_dir() {
  const char* p = std::getenv("FLOWDIM_SCENARIO_DIR");
  REQUIRE_MESSAGE(p != nullptr, "FLOWDIM_SCENARIO_DIR must point at scenarios/");
  return p;
}

struct CliResult {
  int status;
  std::string output;  // stdout + stderr interleaved
};

CliResult run_cli(const std::string& args) {
  std::string cmd = cli_path() + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  int rc = pclose(pipe);
  return {WEXITSTATUS(rc), out};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("list-scenarios shows the shipped files") {
  auto res = run_cli("list-scenarios --scenario " + scenario_dir());
  CHECK(res.status == 0);
  CHECK(res.output.find("circle-exact.ini") != std::string::npos);
  CHECK(res.output.find("torus-golden.ini") != std::string::npos);
}

TEST_CASE("validate accepts the shipped scenarios") {
  for (const char* name : {"circle-exact.ini", "torus-golden.ini"}) {
    auto res = run_cli("validate --scenario " + scenario_dir() + "/" + name);
    CHECK(res.status == 0);
    CHECK(res.output.find("ok:") != std::string::npos);
  }
}

TEST_CASE("malformed scenarios fail with a diagnostic naming the field") {
  spit("/tmp/bad_number.ini",
       "[scenario]\nname = bad\n[flow]\nfamily = circle\n[grid]\nn = twelve\n");
  auto res = run_cli("validate --scenario /tmp/bad_number.ini");
  CHECK(res.status != 0);
  CHECK(res.output.find("'n'") != std::string::npos);

  spit("/tmp/bad_kind.ini",
       "[scenario]\nname = bad\n[flow]\nfamily = circle\n[grid]\nn = 8\n"
       "[stage w]\nkind = frobnicate\n");
  res = run_cli("validate --scenario /tmp/bad_kind.ini");
  CHECK(res.status != 0);
  CHECK(res.output.find("frobnicate") != std::string::npos);

  spit("/tmp/bad_ref.ini",
       "[scenario]\nname = bad\n[flow]\nfamily = circle\n[grid]\nn = 8\n"
       "[stage t]\nkind = discrete-towers\nwitness = missing\nt = 1\nn = 5\nepsilon = 0.1\n");
  res = run_cli("validate --scenario /tmp/bad_ref.ini");
  CHECK(res.status != 0);
  CHECK(res.output.find("missing") != std::string::npos);

  res = run_cli("validate --scenario /tmp/no_such_file.ini");
  CHECK(res.status != 0);
}

TEST_CASE("run circle-exact passes, exits 0, and is byte-deterministic") {
  std::string sc = scenario_dir() + "/circle-exact.ini";
  auto r1 = run_cli("run --scenario " + sc + " --out /tmp/cli_run_a");
  CHECK(r1.status == 0);
  CHECK(r1.output.find("PASS") != std::string::npos);
  auto r2 = run_cli("run --scenario " + sc + " --out /tmp/cli_run_b --threads 2");
  CHECK(r2.status == 0);
  CHECK(slurp("/tmp/cli_run_a/report.json") == slurp("/tmp/cli_run_b/report.json"));
}

TEST_CASE("a failing stage gives a nonzero exit and aborts dependents only") {
  spit("/tmp/failing.ini",
       "[scenario]\nname = failing\nseed = 7\n[flow]\nfamily = circle\nperiod = 1\n"
       "[grid]\nn = 256\ndt = 0.01\n"
       "[stage w]\nkind = exact-circle-witness\nT = 2\ndelta = 1e-9\n"
       "[stage t]\nkind = discrete-towers\nwitness = w\nt = 0.4\nn = 5\nepsilon = 0.1\n"
       "[stage t2]\nkind = discrete-towers\nwitness = t\nt = 1.4142135623730951\nn = 5\n"
       "epsilon = 0.1\n");
  // stage t throws (t = 0.4 is rationally dependent at n = 5); t2 needs t
  auto res = run_cli("run --scenario /tmp/failing.ini --out /tmp/cli_fail");
  CHECK(res.status != 0);
  CHECK(res.output.find("skipped") != std::string::npos);
  auto rep = slurp("/tmp/cli_fail/report.json");
  CHECK(rep.find("\"w:rokhlin_witness\"") != std::string::npos);  // stage w still ran
  CHECK(rep.find("stage_error") != std::string::npos);
}

TEST_CASE("plotdata emits CSV with header; unknown checks are rejected") {
  std::string sc = scenario_dir() + "/circle-exact.ini";
  run_cli("run --scenario " + sc + " --out /tmp/cli_plot");
  auto res = run_cli("plotdata /tmp/cli_plot/report.json condition_a_equivariance");
  CHECK(res.status == 0);
  CHECK(res.output.rfind("parameter,measured,bound\n", 0) == 0);
  CHECK(res.output.find("\n0,") != std::string::npos);  // series-free check: one row

  res = run_cli("plotdata /tmp/cli_plot/report.json no_such_check");
  CHECK(res.status != 0);
  CHECK(res.output.find("no_such_check") != std::string::npos);
}

TEST_CASE("plotdata library call: empty report gives header-only CSV") {
  Report empty;
  auto csv = plotdata_csv(empty.to_json(), "anything");
  CHECK(csv == "parameter,measured,bound\n");
  CHECK_THROWS_AS(plotdata_csv(R"({"certificates":[{"name":"c","checks":[]}]})", "x"),
                  UsageError);
}

TEST_CASE("parse_scenario fills hash, flow, and stage dependencies") {
  auto sc = parse_scenario(scenario_dir() + "/torus-golden.ini");
  CHECK(sc.name == "torus-golden");
  CHECK(sc.flow.family == FlowSpec::Family::TorusLinear);
  CHECK(sc.grid_n == 256);
  CHECK(sc.source_hash.size() == 16);
  CHECK(sc.stages.size() == 6);
  bool roundtrip_needs_witness = false;
  for (const auto& st : sc.stages)
    if (st.name == "roundtrip")
      for (const auto& n : st.needs) roundtrip_needs_witness |= (n == "witness-2");
  CHECK(roundtrip_needs_witness);
}
