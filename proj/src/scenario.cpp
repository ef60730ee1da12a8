#include "flowdim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace flowdim {

namespace {

constexpr double kTau = 6.283185307179586476925287;

std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
  throw ParameterError("scenario " + path + ":" + std::to_string(line) + ": " + what);
}

double to_double(const std::string& path, int line, const std::string& field,
                 const std::string& v) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    parse_fail(path, line, "field '" + field + "' is not a number: '" + v + "'");
  }
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const std::set<std::string> kStageKinds = {
    "exact-circle-witness", "cover",           "witness-from-cover",
    "roundtrip",            "discrete-towers", "transversal-refinement"};

std::vector<double> uniform_grid(double T, int half) {
  std::vector<double> g;
  for (int j = -half; j <= half; ++j) g.push_back(T * j / half);
  return g;
}

// stage parameter access with field diagnostics
double stage_d(const ScenarioStage& st, const std::string& key, double fallback,
               bool required = false) {
  auto it = st.params.find(key);
  if (it == st.params.end()) {
    if (required)
      throw ParameterError("stage '" + st.name + "': missing required field '" + key + "'");
    return fallback;
  }
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ParameterError("stage '" + st.name + "': field '" + key + "' is not a number");
  }
}

std::string stage_s(const ScenarioStage& st, const std::string& key) {
  auto it = st.params.find(key);
  if (it == st.params.end())
    throw ParameterError("stage '" + st.name + "': missing required field '" + key + "'");
  return it->second;
}

struct StageContext {
  const Scenario& sc;
  SampledSpace space;
  std::string out_dir;
  std::map<std::string, TubeCover> covers;
  std::map<std::string, RokhlinWitness> witnesses;
};

Certificate run_exact_circle_witness(StageContext& ctx, const ScenarioStage& st) {
  double T = stage_d(st, "T", 0, true);
  double delta = stage_d(st, "delta", 1e-9);
  double M = ctx.sc.flow.period;
  RokhlinWitness w;
  w.M = M;
  w.p = kTau / M;
  w.T = T;
  w.target_delta = delta;
  w.x.emplace_back(ctx.space,
                   [M](const Pt& p) -> cplx { return std::polar(1.0, kTau * p[0] / M); });
  w.test_set.emplace_back(ctx.space, [](const Pt&) -> cplx { return 1.0; });
  w.test_set.emplace_back(ctx.space,
                          [](const Pt& p) -> cplx { return std::polar(1.0, kTau * p[0]); });
  auto cert = certify_witness(ctx.space, ctx.sc.flow, w, uniform_grid(T, 10));
  cert.name = st.name + ":" + cert.name;
  ctx.witnesses[st.name] = std::move(w);
  if (!ctx.out_dir.empty())
    write_witness(ctx.out_dir + "/" + st.name, ctx.witnesses[st.name]);
  return cert;
}

Certificate run_cover(StageContext& ctx, const ScenarioStage& st) {
  double L = stage_d(st, "L", 0, true);
  double mult_bound = stage_d(st, "mult_bound", 15);
  bool verify = stage_d(st, "verify_boxes", 1) != 0;
  int stride = static_cast<int>(stage_d(st, "stride", 1));

  auto cover = build_long_thin_cover(ctx.space, ctx.sc.flow, L);

  std::size_t uncovered = 0, tested = 0, clashes = 0;
  int mult_worst = 0;
  for (std::size_t i = 0; i < ctx.space.size(); i += stride) {
    const Pt& y = ctx.space.points[i];
    Pt ym = evolve(ctx.sc.flow, y, -L), yp = evolve(ctx.sc.flow, y, L);
    bool ok = false;
    int mult = 0;
    std::vector<int> per_color(cover.num_colors, 0);
    for (const auto& mem : cover.members) {
      bool in = mem.in_open(y);
      if (in) ++mult;
      if (!ok && in && mem.in_open(ym) && mem.in_open(yp)) ok = true;
      if (mem.in_stretched(y, L)) ++per_color[mem.color];
    }
    ++tested;
    if (!ok) ++uncovered;
    mult_worst = std::max(mult_worst, mult);
    for (int c = 0; c < cover.num_colors; ++c)
      if (per_color[c] > 1) ++clashes;
  }

  int box_failures = 0;
  if (verify)
    for (const auto& mem : cover.members)
      if (!verify_box(ctx.space, ctx.sc.flow, mem.box, mem.box.margin / 4).passed())
        ++box_failures;

  Certificate cert;
  cert.name = st.name + ":long_thin_cover";
  cert.params["L"] = L;
  cert.params["members"] = static_cast<double>(cover.members.size());
  cert.params["num_colors"] = cover.num_colors;
  cert.params["samples_tested"] = static_cast<double>(tested);
  cert.add("uncovered_fraction", tested ? double(uncovered) / double(tested) : 1.0, 0, 0);
  cert.add("multiplicity", mult_worst, mult_bound, 0);
  cert.add("color_clashes", static_cast<double>(clashes), 0, 0);
  if (verify) cert.add("box_failures", box_failures, 0, 0);

  ctx.covers[st.name] = std::move(cover);
  if (!ctx.out_dir.empty())
    write_cover_csv(ctx.out_dir + "/" + st.name + ".csv", ctx.covers[st.name]);
  return cert;
}

Certificate run_witness_from_cover(StageContext& ctx, const ScenarioStage& st) {
  const auto& cover = ctx.covers.at(stage_s(st, "cover"));
  double M = stage_d(st, "M", 0, true);
  double T = stage_d(st, "T", 0, true);
  double delta = stage_d(st, "delta", 0, true);
  auto w = witness_from_cover(ctx.space, cover, M, T, delta);
  auto cert = certify_witness(ctx.space, ctx.sc.flow, w, uniform_grid(T, 8));
  cert.name = st.name + ":" + cert.name;
  ctx.witnesses[st.name] = std::move(w);
  if (!ctx.out_dir.empty())
    write_witness(ctx.out_dir + "/" + st.name, ctx.witnesses[st.name]);
  return cert;
}

Certificate run_roundtrip(StageContext& ctx, const ScenarioStage& st) {
  const auto& w = ctx.witnesses.at(stage_s(st, "witness"));
  double L = stage_d(st, "L", 0, true);
  int stride = static_cast<int>(stage_d(st, "stride", 7));
  int d = w.d();

  auto boxes = boxes_from_witness(ctx.space, ctx.sc.flow, w, L);

  double len_target = (1.0 - 16.0 / 96.0) * 8 * L;
  double len_err = 0;
  int box_failures = 0;
  for (const auto& mem : boxes.members) {
    len_err = std::max(len_err, std::abs(mem.box.length - len_target));
    if (!verify_box(ctx.space, ctx.sc.flow, mem.box, mem.box.margin / 4).passed())
      ++box_failures;
  }

  std::size_t uncovered = 0, tested = 0;
  for (std::size_t i = 0; i < ctx.space.size(); i += stride) {
    const Pt& y = ctx.space.points[i];
    ++tested;
    bool ok = false;
    for (const auto& mem : boxes.members) {
      if (!mem.in_open(y)) continue;
      if (mem.in_open(evolve(ctx.sc.flow, y, L)) && mem.in_open(evolve(ctx.sc.flow, y, -L))) {
        ok = true;
        break;
      }
    }
    if (!ok) ++uncovered;
  }

  Certificate cert;
  cert.name = st.name + ":boxes_from_witness";
  cert.params["L"] = L;
  cert.params["members"] = static_cast<double>(boxes.members.size());
  cert.params["samples_tested"] = static_cast<double>(tested);
  cert.add("member_count", static_cast<double>(boxes.members.size()), 2.0 * (d + 1), 0);
  cert.add("box_length_error", len_err, 0, 0);
  cert.add("box_failures", box_failures, 0, 0);
  cert.add("uncovered_fraction", tested ? double(uncovered) / double(tested) : 1.0, 0, 0);
  if (!ctx.out_dir.empty()) write_cover_csv(ctx.out_dir + "/" + st.name + ".csv", boxes);
  return cert;
}

Certificate run_discrete_towers(StageContext& ctx, const ScenarioStage& st) {
  const auto& w = ctx.witnesses.at(stage_s(st, "witness"));
  double t = stage_d(st, "t", 0, true);
  int n = static_cast<int>(stage_d(st, "n", 0, true));
  double eps = stage_d(st, "epsilon", 0, true);
  auto towers = discrete_towers(ctx.space, ctx.sc.flow, w, t, n, eps);
  auto cert = std::move(towers.cert);
  cert.name = st.name + ":" + cert.name;
  return cert;
}

Certificate run_transversal_refinement(StageContext& ctx, const ScenarioStage& st) {
  if (ctx.sc.flow.family != FlowSpec::Family::TorusLinear)
    throw ParameterError("stage '" + st.name + "': transversal refinement needs a torus flow");
  double r = stage_d(st, "r", 0.1);
  int levels = static_cast<int>(stage_d(st, "levels", 3));
  int n0 = static_cast<int>(stage_d(st, "n0", 32));
  double dt0 = stage_d(st, "dt0", 1.0 / 64.0);

  std::vector<std::array<double, 3>> series;
  int level_failures = 0;
  for (int lvl = 0; lvl < levels; ++lvl) {
    auto space = make_torus_space(ctx.sc.flow, n0 << lvl);
    auto res = transversal_projection(space, ctx.sc.flow, "all", r, dt0 / (1 << lvl));
    if (!res.cert.passed()) ++level_failures;
    for (const auto& ch : res.cert.checks)
      if (ch.name == "idempotent_residual_l1")
        series.push_back({1.0 / (n0 << lvl), ch.measured, ch.bound});
  }

  double ratio_min = 1e300, ratio_max = 0;
  for (std::size_t i = 0; i + 1 < series.size(); ++i) {
    double ratio = series[i + 1][1] / series[i][1];
    ratio_min = std::min(ratio_min, ratio);
    ratio_max = std::max(ratio_max, ratio);
  }

  Certificate cert;
  cert.name = st.name + ":transversal_refinement";
  cert.l1_norm_semantics = true;
  cert.params["r"] = r;
  cert.params["levels"] = levels;
  cert.add("level_failures", level_failures, 0, 0);
  auto& ch = cert.add("idempotent_residual_l1", series.back()[1], series.back()[2], 0);
  ch.series = series;
  cert.add("refinement_ratio_max", ratio_max, 0.7, 0);
  // lower bound as a check: passes iff ratio_min >= 0.3
  cert.add("refinement_ratio_min", -ratio_min, -0.3, 0);
  return cert;
}

Certificate run_stage(StageContext& ctx, const ScenarioStage& st) {
  if (st.kind == "exact-circle-witness") return run_exact_circle_witness(ctx, st);
  if (st.kind == "cover") return run_cover(ctx, st);
  if (st.kind == "witness-from-cover") return run_witness_from_cover(ctx, st);
  if (st.kind == "roundtrip") return run_roundtrip(ctx, st);
  if (st.kind == "discrete-towers") return run_discrete_towers(ctx, st);
  if (st.kind == "transversal-refinement") return run_transversal_refinement(ctx, st);
  throw ParameterError("stage '" + st.name + "': unknown kind '" + st.kind + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// parsing

Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("scenario file not readable: " + path);
  std::stringstream raw;
  raw << in.rdbuf();
  std::string text = raw.str();

  Scenario sc;
  sc.source_hash = fnv1a_hex(text);

  std::string section, stage_name;
  ScenarioStage* stage = nullptr;
  std::map<std::string, std::string> flow_kv, grid_kv;
  std::set<std::string> stage_names;

  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty() || line[0] == ';') continue;

    if (line.front() == '[') {
      if (line.back() != ']') parse_fail(path, lineno, "unterminated section header");
      std::string header = trim(line.substr(1, line.size() - 2));
      if (header == "scenario" || header == "flow" || header == "grid") {
        section = header;
        stage = nullptr;
      } else if (header.rfind("stage ", 0) == 0) {
        section = "stage";
        stage_name = trim(header.substr(6));
        if (stage_name.empty()) parse_fail(path, lineno, "stage section needs a name");
        if (!stage_names.insert(stage_name).second)
          parse_fail(path, lineno, "duplicate stage name '" + stage_name + "'");
        sc.stages.push_back({});
        stage = &sc.stages.back();
        stage->name = stage_name;
      } else {
        parse_fail(path, lineno, "unknown section [" + header + "]");
      }
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string::npos) parse_fail(path, lineno, "expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) parse_fail(path, lineno, "empty key");
    if (section.empty()) parse_fail(path, lineno, "key '" + key + "' outside any section");

    if (section == "scenario") {
      if (key == "name")
        sc.name = val;
      else if (key == "seed")
        sc.seed = static_cast<std::uint64_t>(std::stoull(val));
      else
        parse_fail(path, lineno, "unknown [scenario] field '" + key + "'");
    } else if (section == "flow") {
      flow_kv[key] = val;
    } else if (section == "grid") {
      grid_kv[key] = val;
    } else {  // stage
      if (key == "kind") {
        if (!kStageKinds.count(val))
          parse_fail(path, lineno, "unknown stage kind '" + val + "'");
        stage->kind = val;
      } else if (key == "needs") {
        for (auto& n : split_list(val)) stage->needs.push_back(n);
      } else {
        stage->params[key] = val;
      }
    }
  }

  if (sc.name.empty()) parse_fail(path, 0, "missing [scenario] name");

  // flow section
  auto fit = flow_kv.find("family");
  if (fit == flow_kv.end()) parse_fail(path, 0, "missing [flow] family");
  const std::string& fam = fit->second;
  if (fam == "circle") {
    sc.flow = FlowSpec::circle(flow_kv.count("period")
                                   ? to_double(path, 0, "period", flow_kv["period"])
                                   : 1.0);
  } else if (fam == "torus") {
    auto vit = flow_kv.find("velocity");
    if (vit == flow_kv.end()) parse_fail(path, 0, "torus flow needs [flow] velocity");
    std::vector<double> v;
    for (auto& s : split_list(vit->second)) v.push_back(to_double(path, 0, "velocity", s));
    if (v.size() != 2) parse_fail(path, 0, "velocity must have two components");
    sc.flow = FlowSpec::torus(v);
  } else if (fam == "suspension") {
    sc.flow = FlowSpec::suspension(to_double(path, 0, "angle", flow_kv["angle"]),
                                   flow_kv.count("roof")
                                       ? to_double(path, 0, "roof", flow_kv["roof"])
                                       : 1.0);
  } else if (fam == "hull") {
    sc.flow =
        FlowSpec::fibonacci_hull(to_double(path, 0, "window_radius", flow_kv["window_radius"]));
  } else {
    parse_fail(path, 0, "unknown flow family '" + fam + "'");
  }

  // grid section
  if (!grid_kv.count("n")) parse_fail(path, 0, "missing [grid] n");
  sc.grid_n = static_cast<int>(to_double(path, 0, "n", grid_kv["n"]));
  if (sc.grid_n <= 0) parse_fail(path, 0, "[grid] n must be positive");
  sc.grid_dt = grid_kv.count("dt") ? to_double(path, 0, "dt", grid_kv["dt"]) : 0.01;
  if (sc.grid_dt <= 0) parse_fail(path, 0, "[grid] dt must be positive");
  if (grid_kv.count("span")) sc.span = to_double(path, 0, "span", grid_kv["span"]);

  // stage validation: kinds set, implicit needs resolve to earlier stages
  std::set<std::string> seen;
  for (auto& st : sc.stages) {
    if (st.kind.empty()) parse_fail(path, 0, "stage '" + st.name + "' has no kind");
    for (const char* ref : {"cover", "witness"})
      if (st.params.count(ref)) st.needs.push_back(st.params.at(ref));
    for (const auto& n : st.needs)
      if (!seen.count(n))
        parse_fail(path, 0,
                   "stage '" + st.name + "' needs '" + n + "' which is not an earlier stage");
    seen.insert(st.name);
  }
  return sc;
}

// ---------------------------------------------------------------------------
// execution and reporting

bool Report::all_passed() const {
  if (!skipped.empty()) return false;
  for (const auto& c : certs)
    if (!c.passed()) return false;
  return true;
}

int Report::checks_total() const {
  int n = 0;
  for (const auto& c : certs) n += static_cast<int>(c.checks.size());
  return n;
}

int Report::checks_passed() const {
  int n = 0;
  for (const auto& c : certs)
    for (const auto& ch : c.checks) n += ch.pass ? 1 : 0;
  return n;
}

double Report::max_residual() const {
  double m = -1e300;
  for (const auto& c : certs)
    for (const auto& ch : c.checks) m = std::max(m, ch.measured - ch.bound);
  return certs.empty() ? 0.0 : m;
}

std::string Report::to_json() const {
  nlohmann::ordered_json j;
  j["scenario"] = scenario_name;
  j["scenario_hash"] = scenario_hash;
  j["seed"] = seed;
  j["grid"] = grid;
  j["summary"]["checks_total"] = checks_total();
  j["summary"]["checks_passed"] = checks_passed();
  j["summary"]["max_residual"] = max_residual();
  j["summary"]["all_passed"] = all_passed();
  j["skipped_stages"] = skipped;
  j["certificates"] = nlohmann::ordered_json::array();
  for (const auto& c : certs) j["certificates"].push_back(nlohmann::ordered_json::parse(c.to_json()));
  return j.dump(2);
}

Report run_scenario(const Scenario& sc, const std::string& out_dir) {
  Report rep;
  rep.scenario_name = sc.name;
  rep.scenario_hash = sc.source_hash;
  rep.seed = sc.seed;
  rep.grid["n"] = sc.grid_n;
  rep.grid["dt"] = sc.grid_dt;

  StageContext ctx{sc, {}, out_dir, {}, {}};
  switch (sc.flow.family) {
    case FlowSpec::Family::PeriodicCircle:
      ctx.space = make_circle_space(sc.flow, sc.grid_n);
      break;
    case FlowSpec::Family::TorusLinear:
      ctx.space = make_torus_space(sc.flow, sc.grid_n);
      break;
    case FlowSpec::Family::Suspension:
      ctx.space = make_suspension_space(sc.flow, sc.grid_n, sc.grid_n);
      break;
    case FlowSpec::Family::TilingHull:
      ctx.space = make_hull_space(sc.flow, sc.grid_n, sc.span);
      break;
  }

  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  std::set<std::string> dead;  // failed or skipped stages
  for (const auto& st : sc.stages) {
    bool blocked = false;
    for (const auto& n : st.needs)
      if (dead.count(n)) blocked = true;
    if (blocked) {
      dead.insert(st.name);
      rep.skipped.push_back(st.name);
      continue;
    }
    try {
      auto cert = run_stage(ctx, st);
      if (!cert.passed()) dead.insert(st.name);
      rep.certs.push_back(std::move(cert));
    } catch (const std::exception& e) {
      Certificate cert;
      cert.name = st.name + ":" + st.kind;
      cert.add("stage_error", 1, 0, 0);
      cert.params["error"] = 1;
      rep.certs.push_back(std::move(cert));
      rep.skipped.push_back(st.name + " (" + e.what() + ")");
      dead.insert(st.name);
    }
  }

  if (!out_dir.empty()) {
    std::ofstream out(out_dir + "/report.json");
    out << rep.to_json() << "\n";
  }
  return rep;
}

std::string plotdata_csv(const std::string& report_json, const std::string& check_name) {
  auto j = nlohmann::ordered_json::parse(report_json);
  std::ostringstream csv;
  csv << "parameter,measured,bound\n";
  const auto& certs = j.at("certificates");
  if (certs.empty()) return csv.str();

  bool found = false;
  for (const auto& cert : certs) {
    std::string cname = cert.at("name").get<std::string>();
    for (const auto& ch : cert.at("checks")) {
      std::string name = ch.at("name").get<std::string>();
      if (name != check_name && cname + "/" + name != check_name) continue;
      found = true;
      if (ch.contains("series")) {
        for (const auto& row : ch.at("series"))
          csv << row[0].get<double>() << "," << row[1].get<double>() << ","
              << row[2].get<double>() << "\n";
      } else {
        csv << 0 << "," << ch.at("measured").get<double>() << "," << ch.at("bound").get<double>()
            << "\n";
      }
    }
  }
  if (!found) throw UsageError("no check named '" + check_name + "' in report");
  return csv.str();
}

std::vector<std::string> list_scenarios(const std::string& dir) {
  std::vector<std::string> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ini")
      out.push_back(e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace flowdim
