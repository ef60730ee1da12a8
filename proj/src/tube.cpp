#include "flowdim/tube.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>

#include <json.hpp>

namespace flowdim {

// ---------------------------------------------------------------------------
// Certificate

Check& Certificate::add(const std::string& check_name, double measured, double bound,
                        double tol) {
  Check c;
  c.name = check_name;
  c.measured = measured;
  c.bound = bound;
  c.tolerance = tol;
  c.pass = measured <= bound + tol;
  checks.push_back(std::move(c));
  return checks.back();
}

bool Certificate::passed() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

std::string Certificate::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["pass"] = passed();
  j["l1_norm_semantics"] = l1_norm_semantics;
  j["params"] = params;
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : checks) {
    nlohmann::ordered_json cj;
    cj["name"] = c.name;
    cj["measured"] = c.measured;
    cj["bound"] = c.bound;
    cj["tolerance"] = c.tolerance;
    cj["pass"] = c.pass;
    if (!c.series.empty()) {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& row : c.series) arr.push_back({row[0], row[1], row[2]});
      cj["series"] = arr;
    }
    j["checks"].push_back(std::move(cj));
  }
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// BoxSpec

bool BoxSpec::contains(const Pt& p) const {
  auto t = time_coord(p);
  return t && std::abs(*t) <= length / 2 + 1e-12 * (1 + length);
}

double BoxSpec::a_plus(const Pt& p) const {
  auto t = time_coord(p);
  if (!t) throw BoxError("a_plus outside box tube");
  return length / 2 - *t;
}

double BoxSpec::a_minus(const Pt& p) const {
  auto t = time_coord(p);
  if (!t) throw BoxError("a_minus outside box tube");
  return -length / 2 - *t;
}

BoxSpec stretch_box(const BoxSpec& box, double L) {
  if (L < 0) throw ParameterError("stretch_box: negative L");
  if (2 * L >= box.margin) throw MarginExhausted("stretch_box: L >= margin/2");
  BoxSpec b = box;
  b.length += 2 * L;
  b.margin -= 2 * L;
  b.desc += " stretched";
  return b;
}

Certificate verify_box(const SampledSpace& space, const FlowSpec& flow, const BoxSpec& box,
                       double t_step) {
  if (!(t_step > 0) || t_step > box.margin / 4 + 1e-12)
    throw UsageError("verify_box: need 0 < t_step <= margin/4");
  if (box.slice_samples.empty()) throw UsageError("verify_box: empty slice parametrization");

  Certificate cert;
  cert.name = "box:" + box.desc;
  cert.params["length"] = box.length;
  cert.params["margin"] = box.margin;
  cert.params["t_step"] = t_step;
  cert.params["slice_samples"] = static_cast<double>(box.slice_samples.size());

  double half = box.length / 2;
  int nt = std::max(1, static_cast<int>(std::ceil(box.length / t_step)));
  if (box.length == 0) nt = 0;
  int ns = static_cast<int>(box.slice_samples.size());

  // sweep the parametrization (s, t) -> Phi_t(s)
  std::vector<Pt> mapped;
  std::vector<std::pair<int, double>> param;  // (slice index, t)
  mapped.reserve(static_cast<std::size_t>(ns) * (nt + 1));
  double worst_tc = 0, worst_len = 0;
  int member_fail = 0, total_inside = 0;
  for (int i = 0; i < ns; ++i) {
    for (int j = 0; j <= nt; ++j) {
      double t = nt == 0 ? 0.0 : -half + box.length * j / nt;
      Pt y = evolve(flow, box.slice_samples[i], t);
      ++total_inside;
      if (!box.contains(y)) ++member_fail;
      auto tc = box.time_coord(y);
      if (tc) {
        worst_tc = std::max(worst_tc, std::abs(*tc - t));
        worst_len = std::max(worst_len, std::abs((box.a_plus(y) - box.a_minus(y)) - box.length));
      } else {
        worst_tc = std::max(worst_tc, box.margin);
      }
      mapped.push_back(std::move(y));
      param.push_back({i, t});
    }
  }
  cert.add("membership_along_tube", static_cast<double>(member_fail), 0, 0);
  cert.add("time_coordinate_consistency", worst_tc, 0, 1e-9 * (1 + box.length));
  cert.add("length_constancy", worst_len, 0, 1e-9 * (1 + box.length));

  // exit property: the margins beyond [a_-, a_+] stay outside the box
  int exit_fail = 0;
  for (int i = 0; i < ns; ++i) {
    for (double dt = t_step; dt <= box.margin + 1e-12; dt += t_step) {
      if (box.contains(evolve(flow, box.slice_samples[i], half + dt))) ++exit_fail;
      if (box.contains(evolve(flow, box.slice_samples[i], -half - dt))) ++exit_fail;
    }
  }
  cert.add("exit_on_margins", static_cast<double>(exit_fail), 0, 0);

  // injectivity of (s, t) -> Phi_t(s) within sample resolution: distinct
  // parameters must not collide closer than a fraction of the local image step
  double min_adj = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < mapped.size(); ++a) {
    if (param[a].first + 1 < ns) {
      std::size_t b = a + nt + 1;  // same t, next slice sample
      min_adj = std::min(min_adj, space.metric(mapped[a], mapped[b]));
    }
    if (a + 1 < mapped.size() && param[a + 1].first == param[a].first)
      min_adj = std::min(min_adj, space.metric(mapped[a], mapped[a + 1]));
  }
  if (!std::isfinite(min_adj)) min_adj = 1.0;
  // distinct sheets of a legitimate long box can pass arbitrarily close
  // transversally, so genuine non-injectivity is only decidable at numerical
  // coincidence scale; the cap keeps near-miss sheets from counting
  double sep = std::min(0.4 * min_adj, 1e-6);
  int collide = 0;
  for (std::size_t a = 0; a < mapped.size(); ++a) {
    for (std::size_t b = a + 1; b < mapped.size(); ++b) {
      bool adjacent = std::abs(param[a].first - param[b].first) <= 1 &&
                      std::abs(param[a].second - param[b].second) <= 1.5 * t_step;
      if (adjacent) continue;
      if (space.metric(mapped[a], mapped[b]) < sep) ++collide;
    }
  }
  cert.add("slice_tube_injectivity", static_cast<double>(collide), 0, 0);
  return cert;
}

// ---------------------------------------------------------------------------
// Return-map interval system (two towers over the transversal rotation)

namespace {

struct TowerSystem {
  double theta = 0;  // return rotation
  double T_r = 0;    // return time
  struct Atom {
    double start, len;
    int tower, level;
  };
  std::vector<Atom> atoms;  // sorted by start, starts[0] == 0
  std::array<long long, 2> height{0, 0};
  std::array<double, 2> base_start{0, 0};
  std::array<double, 2> base_len{0, 0};
  double probe_gap = 0;  // guaranteed transversal separation scale

  int find(double u) const {
    // u in [0,1); atoms sorted with atoms[0].start == 0
    int lo = 0, hi = static_cast<int>(atoms.size()) - 1;
    while (lo < hi) {
      int mid = (lo + hi + 1) / 2;
      if (atoms[mid].start <= u)
        lo = mid;
      else
        hi = mid - 1;
    }
    return lo;
  }

  double span(int tower) const { return static_cast<double>(height[tower]) * T_r; }
};

double dist_to_int(double x) { return std::abs(x - std::round(x)); }

// Kakutani-Rokhlin two-tower partition for rotation by theta, with both tower
// flow-heights >= min_height_time. Self-verifying numeric construction.
TowerSystem build_towers(double theta, double T_r, double min_height_time) {
  theta = frac(theta);
  TowerSystem tw;
  tw.theta = theta;
  tw.T_r = T_r;

  // convergent denominators of theta until q_n * T_r >= min_height_time
  long long q_prev = 0, q_cur = 1;
  double x = theta;
  double probe = 1.0;
  auto step = [&]() {
    if (x < 1e-12 || x > 1 - 1e-12)
      throw NotFree("return rotation is rational to machine precision");
    double inv = 1.0 / x;
    double af = std::floor(inv);
    x = inv - af;
    long long q_next = static_cast<long long>(af) * q_cur + q_prev;
    q_prev = q_cur;
    q_cur = q_next;
    if (q_cur > 2000000) throw ResolutionError("interval exchange too fine for doubles");
  };
  while (static_cast<double>(q_cur) * T_r < min_height_time) {
    probe = std::min(probe, dist_to_int(static_cast<double>(q_cur) * theta));
    step();
  }
  long long q_n = q_cur;
  step();
  long long q_n1 = q_cur;
  tw.probe_gap = probe;

  double dn = dist_to_int(static_cast<double>(q_n) * theta);
  double dn1 = dist_to_int(static_cast<double>(q_n1) * theta);
  if (dn < 1e-11 || dn1 < 1e-11) throw NotFree("return rotation is rational");

  // orbit points frac(j*theta), j < q_n + q_n1, cut the circle into atoms of
  // exactly two lengths dn and dn1 (counts q_n1 and q_n)
  long long N = q_n + q_n1;
  std::vector<double> starts(N);
  for (long long j = 0; j < N; ++j) starts[j] = frac(static_cast<double>(j) * theta);
  std::sort(starts.begin(), starts.end());
  tw.atoms.resize(N);
  long long count_dn = 0, count_dn1 = 0;
  for (long long i = 0; i < N; ++i) {
    double next = i + 1 < N ? starts[i + 1] : 1.0;
    double len = next - starts[i];
    int tower;
    if (std::abs(len - dn) < 1e-10)
      tower = 0, ++count_dn;
    else if (std::abs(len - dn1) < 1e-10)
      tower = 1, ++count_dn1;
    else
      throw ResolutionError("atom length outside the two-tower pattern");
    tw.atoms[i] = {starts[i], len, tower, -1};
  }
  if (count_dn != q_n1 || count_dn1 != q_n)
    throw ResolutionError("atom counts break the two-tower identity");
  tw.height = {q_n1, q_n};
  tw.base_len = {dn, dn1};

  // link atoms under the rotation; the two atoms adjacent to 0 have no
  // incoming link (bases), the two preimages of the broken images are tops
  std::vector<int> next_atom(N, -1);
  std::vector<int> incoming(N, 0);
  for (long long i = 0; i < N; ++i) {
    double target = frac(tw.atoms[i].start + theta);
    int j = tw.find(target);
    // frac() can land a few ulps below the true start; snap forward
    if (j + 1 < N && tw.atoms[j + 1].start - target < 1e-10) ++j;
    else if (j + 1 == N && 1.0 - target < 1e-10) j = 0, target = 0.0;
    if (std::abs(tw.atoms[j].start - target) < 1e-10 &&
        std::abs(tw.atoms[j].len - tw.atoms[i].len) < 1e-10) {
      next_atom[i] = j;
      ++incoming[j];
    }
  }
  std::vector<int> bases;
  for (long long i = 0; i < N; ++i)
    if (incoming[i] == 0) bases.push_back(static_cast<int>(i));
  if (bases.size() != 2) throw ResolutionError("tower bases not identified");
  long long visited = 0;
  for (int b : bases) {
    int tower = tw.atoms[b].tower;
    tw.base_start[tower] = tw.atoms[b].start;
    long long lvl = 0;
    for (int a = b; a != -1; a = next_atom[a]) {
      if (tw.atoms[a].tower != tower || tw.atoms[a].level != -1)
        throw ResolutionError("tower chains inconsistent");
      tw.atoms[a].level = static_cast<int>(lvl++);
      ++visited;
    }
    if (lvl != tw.height[tower]) throw ResolutionError("tower height mismatch");
  }
  if (visited != N) throw ResolutionError("tower chains did not cover all atoms");
  // numeric check of the exact identity q_{n+1}|q_n t| + q_n |q_{n+1} t| = 1
  if (std::abs(static_cast<double>(q_n1) * dn + static_cast<double>(q_n) * dn1 - 1.0) > 1e-8)
    throw ResolutionError("two-tower measure identity violated");
  return tw;
}

// transversal chart: p -> (u0 on the base circle, tau0 = time since crossing)
using TransversalCoords = std::function<std::pair<double, double>(const Pt&)>;

struct Anchor {
  int tower;
  double t;  // flow time since the tower's base hit (may be negative/over-tall)
};

// Up to three base-relative time representations of p, enough to evaluate any
// tent whose window reaches W beyond the tower edges.
int anchors_of(const TowerSystem& tw, double u0, double tau0, double W, Anchor out[3]) {
  int a = tw.find(u0);
  const auto& atom = tw.atoms[a];
  double offset = u0 - atom.start;
  double t0 = tau0 + static_cast<double>(atom.level) * tw.T_r;
  int n = 0;
  out[n++] = {atom.tower, t0};
  double S = tw.span(atom.tower);
  double u_base = tw.base_start[atom.tower] + offset;
  if (S - t0 < W) {
    // beyond the own top the orbit enters a base of the next tower
    double u_next = frac(u_base + static_cast<double>(tw.height[atom.tower]) * tw.theta);
    const auto& na = tw.atoms[tw.find(u_next)];
    if (na.level == 0) out[n++] = {na.tower, t0 - S};
  }
  if (t0 < W) {
    // right below the own base sits the top of the previous tower
    double u_top = frac(u_base - tw.theta);
    const auto& pa = tw.atoms[tw.find(u_top)];
    if (pa.level == tw.height[pa.tower] - 1)
      out[n++] = {pa.tower, t0 + tw.span(pa.tower)};
  }
  return n;
}

struct MemberPlan {
  int tower;
  double center;
  bool straddler = false;  // centered on the tower top, covers the junction
  int color = -1;
};

struct CoverPlan {
  std::shared_ptr<TowerSystem> tw;
  TransversalCoords coords;
  double L = 0;
  std::vector<MemberPlan> members;
  std::array<std::vector<double>, 2> centers;  // per tower, ascending
};

// Window centers for one tower of flow-height S. Regular windows keep their
// stretched support [c-5L, c+5L] strictly inside the open column (0, S); the
// straddler at c = S covers the top and, through the junction, the strip of
// height 3L above the bases its top atom flows onto.
std::vector<double> ladder_centers(double S, double L) {
  if (S <= 12 * L) return {S / 2};
  double first = 6 * L, last = S - 5.5 * L;
  double P = last - first;
  int k = std::max(1, static_cast<int>(std::ceil(P / (5.5 * L))));
  std::vector<double> cs;
  for (int i = 0; i <= k; ++i) cs.push_back(first + P * i / k);
  return cs;
}

// stretched supports overlap: same column within 10L, or through the junction
// against a straddler's overhang (reach 5L above the bases)
bool members_conflict(const MemberPlan& a, const MemberPlan& b, double L,
                      const std::array<double, 2>& span) {
  if (a.tower == b.tower && std::abs(a.center - b.center) < 10 * L + 1e-9) return true;
  auto junction = [&](const MemberPlan& s, const MemberPlan& m) {
    if (!s.straddler) return false;
    double over = s.center + 5 * L - span[s.tower];  // reach above the bases
    return m.center - 5 * L < over + 1e-9;
  };
  return junction(a, b) || junction(b, a);
}

double tent_value(double t, double c, double L) {
  return std::clamp((4 * L - std::abs(t - c)) / L, 0.0, 1.0);
}

// sum over all member tents squared at p; >= 1 on the covered region
double tent_sum_sq(const CoverPlan& plan, const Pt& p) {
  auto [u0, tau0] = plan.coords(p);
  Anchor an[3];
  int na = anchors_of(*plan.tw, u0, tau0, 4 * plan.L + 1e-9, an);
  double s = 0;
  for (int k = 0; k < na; ++k) {
    for (double c : plan.centers[an[k].tower]) {
      double m = tent_value(an[k].t, c, plan.L);
      s += m * m;
    }
  }
  return s;
}

// tent of one member at p (max over anchors; windows are disjoint per anchor)
double member_tent(const CoverPlan& plan, const MemberPlan& mp, const Pt& p) {
  auto [u0, tau0] = plan.coords(p);
  Anchor an[3];
  int na = anchors_of(*plan.tw, u0, tau0, 4 * plan.L + 1e-9, an);
  double m = 0;
  for (int k = 0; k < na; ++k)
    if (an[k].tower == mp.tower) m = std::max(m, tent_value(an[k].t, mp.center, plan.L));
  return m;
}

std::optional<double> member_anchor_time(const CoverPlan& plan, const MemberPlan& mp,
                                         const Pt& p, double W) {
  auto [u0, tau0] = plan.coords(p);
  Anchor an[3];
  int na = anchors_of(*plan.tw, u0, tau0, W + 1e-9, an);
  for (int k = 0; k < na; ++k)
    if (an[k].tower == mp.tower && std::abs(an[k].t - mp.center) < W)
      return an[k].t - mp.center;
  return std::nullopt;
}

// slow, construction-independent time coordinate of the enclosing box:
// enumerate transversal crossings and test the closed base interval
std::function<std::optional<double>(const Pt&)> box_time_coord(
    std::shared_ptr<TowerSystem> tw, TransversalCoords coords, int tower, double center,
    double half, double margin) {
  return [tw, coords, tower, center, half, margin](const Pt& p) -> std::optional<double> {
    auto [u0, tau0] = coords(p);
    double lo = center - half - margin * 1.02, hi = center + half + margin * 1.02;
    double b0 = tw->base_start[tower], b1 = b0 + tw->base_len[tower];
    long long k_lo = static_cast<long long>(std::floor((lo - tau0) / tw->T_r));
    long long k_hi = static_cast<long long>(std::ceil((hi - tau0) / tw->T_r));
    for (long long k = k_lo; k <= k_hi; ++k) {
      double t = tau0 + static_cast<double>(k) * tw->T_r;
      if (t < lo || t > hi) continue;
      double u = frac(u0 - static_cast<double>(k) * tw->theta);
      if (u >= b0 - 1e-12 && u <= b1 + 1e-12) return t - center;
    }
    return std::nullopt;
  };
}

TubeCover assemble_rotation_cover(const SampledSpace& space, const FlowSpec& flow, double L,
                                  const std::string& region,
                                  std::shared_ptr<TowerSystem> tw, TransversalCoords coords,
                                  std::function<Pt(double)> transversal_point) {
  auto plan = std::make_shared<CoverPlan>();
  plan->tw = tw;
  plan->coords = coords;
  plan->L = L;

  std::array<double, 2> span{tw->span(0), tw->span(1)};
  for (int tower = 0; tower < 2; ++tower) {
    auto cs = ladder_centers(span[tower], L);
    cs.push_back(span[tower]);  // junction straddler
    plan->centers[tower] = cs;
    for (std::size_t m = 0; m < cs.size(); ++m)
      plan->members.push_back({tower, cs[m], m + 1 == cs.size(), -1});
  }
  // greedy coloring of the stretched-overlap conflict graph
  std::sort(plan->members.begin(), plan->members.end(),
            [](const MemberPlan& a, const MemberPlan& b) { return a.center < b.center; });
  for (std::size_t i = 0; i < plan->members.size(); ++i) {
    bool used[4] = {false, false, false, false};
    for (std::size_t j = 0; j < i; ++j)
      if (members_conflict(plan->members[i], plan->members[j], L, span))
        used[plan->members[j].color] = true;
    int c = 0;
    while (c < 4 && used[c]) ++c;
    if (c == 4) throw ResolutionError("cover conflict graph needs more than 4 colors");
    plan->members[i].color = c;
  }

  TubeCover cover;
  cover.L = L;
  cover.region = region;
  cover.num_colors = 4;
  cover.phi_flow_lipschitz = 10.0 / L;  // |d phi/dt| <= 2/L + 2*mult/L, mult <= 4
  double margin = std::min(0.4 * L, 0.45 * (static_cast<double>(tw->height[1]) * tw->T_r - 10 * L));
  if (!(margin > 0)) throw ResolutionError("tower too short for box margins");

  const auto& Kidx = space.region(region);
  for (std::size_t mi = 0; mi < plan->members.size(); ++mi) {
    const MemberPlan mp = plan->members[mi];
    TubeMember mem;
    mem.color = mp.color;
    mem.desc = "tower" + std::to_string(mp.tower) + "@" + std::to_string(mp.center);
    mem.in_open = [plan, mp](const Pt& p) { return member_tent(*plan, mp, p) > 0; };
    mem.in_stretched = [plan, mp](const Pt& p, double S) {
      return member_anchor_time(*plan, mp, p, 4 * plan->L + S).has_value();
    };
    mem.phi = [plan, mp](const Pt& p) {
      double m = member_tent(*plan, mp, p);
      if (m <= 0) return 0.0;
      return m * m / tent_sum_sq(*plan, p);
    };
    double half = 5 * L;
    mem.a_plus_fast = [plan, mp, half](const Pt& p) {
      auto t = member_anchor_time(*plan, mp, p, 4 * plan->L);
      if (!t) throw BoxError("a_plus_fast outside member");
      return half - *t;
    };
    mem.box.length = 2 * half;
    mem.box.margin = margin;
    mem.box.desc = mem.desc;
    mem.box.time_coord = box_time_coord(tw, coords, mp.tower, mp.center, half, margin);
    int ns = 33;
    for (int i = 0; i < ns; ++i) {
      double u = tw->base_start[mp.tower] + tw->base_len[mp.tower] * (i + 0.5) / ns;
      mem.box.slice_samples.push_back(evolve(flow, transversal_point(u), mp.center));
    }
    cover.members.push_back(std::move(mem));
  }

  // sampled member sets, parallel over the region
  std::vector<std::vector<std::vector<int>>> parts(thread_count());
  for (auto& p : parts) p.resize(cover.members.size());
  std::atomic<int> slot{0};
  parallel_for(Kidx.size(), [&](std::size_t lo, std::size_t hi) {
    int me = slot.fetch_add(1);
    for (std::size_t ii = lo; ii < hi; ++ii) {
      int i = Kidx[ii];
      const Pt& p = space.points[i];
      auto [u0, tau0] = plan->coords(p);
      Anchor an[3];
      int na = anchors_of(*tw, u0, tau0, 4 * L + 1e-9, an);
      for (std::size_t mi = 0; mi < plan->members.size(); ++mi) {
        const MemberPlan& mp = plan->members[mi];
        for (int k = 0; k < na; ++k)
          if (an[k].tower == mp.tower && tent_value(an[k].t, mp.center, L) > 0) {
            parts[me][mi].push_back(i);
            break;
          }
      }
    }
  });
  for (std::size_t mi = 0; mi < cover.members.size(); ++mi) {
    auto& dst = cover.members[mi].samples;
    for (const auto& part : parts) dst.insert(dst.end(), part[mi].begin(), part[mi].end());
    std::sort(dst.begin(), dst.end());
  }
  return cover;
}

// 1-d translation cover for the tiling hull leaf: interval windows, 2 colors
TubeCover build_hull_cover(const SampledSpace& space, const FlowSpec& flow, double L,
                           const std::string& region) {
  const auto& Kidx = space.region(region);
  double klo = std::numeric_limits<double>::infinity(), khi = -klo;
  for (int i : Kidx) {
    klo = std::min(klo, space.points[i][0]);
    khi = std::max(khi, space.points[i][0]);
  }
  double margin = 0.4 * L;
  // fixed stride keeps same-color windows 11L apart (stretched width is 10L)
  double lo = klo - L, hi = khi + L;
  int M = std::max(1, static_cast<int>(std::ceil((hi - lo) / (5.5 * L))) + 1);
  double c_last = lo + 5.5 * L * (M - 1);
  if (c_last + 5 * L + margin > flow.window_radius || lo - 5 * L - margin < -flow.window_radius)
    throw ResolutionError("hull window too small for the requested cover scale");

  TubeCover cover;
  cover.L = L;
  cover.region = region;
  cover.num_colors = 2;
  cover.phi_flow_lipschitz = 6.0 / L;
  for (int m = 0; m < M; ++m) {
    double c = lo + 5.5 * L * m;
    TubeMember mem;
    mem.color = m % 2;
    mem.desc = "leaf@" + std::to_string(c);
    mem.in_open = [c, L](const Pt& p) { return std::abs(p[0] - c) < 4 * L; };
    mem.in_stretched = [c, L](const Pt& p, double S) {
      return std::abs(p[0] - c) <= 4 * L + S;
    };
    auto all_tents = [lo, M, L](double s) {
      double acc = 0;
      for (int k = 0; k < M; ++k) {
        double m2 = tent_value(s, lo + 5.5 * L * k, L);
        acc += m2 * m2;
      }
      return acc;
    };
    mem.phi = [c, L, all_tents](const Pt& p) {
      double m = tent_value(p[0], c, L);
      if (m <= 0) return 0.0;
      return m * m / all_tents(p[0]);
    };
    mem.a_plus_fast = [c, L](const Pt& p) { return c + 5 * L - p[0]; };
    mem.box.length = 10 * L;
    mem.box.margin = margin;
    mem.box.desc = mem.desc;
    mem.box.time_coord = [c, L, margin](const Pt& p) -> std::optional<double> {
      double t = p[0] - c;
      if (std::abs(t) > 5 * L + margin * 1.02) return std::nullopt;
      return t;
    };
    mem.box.slice_samples = {Pt{c}};
    for (int i : Kidx)
      if (mem.in_open(space.points[i])) mem.samples.push_back(i);
    cover.members.push_back(std::move(mem));
  }
  return cover;
}

}  // namespace

TubeCover build_long_thin_cover(const SampledSpace& space, const FlowSpec& flow, double L,
                                const std::string& region) {
  if (!(L > 0)) throw ParameterError("build_long_thin_cover: L must be positive");
  double min_height = 10.5 * L;

  switch (flow.family) {
    case FlowSpec::Family::PeriodicCircle: {
      // freeness probe: a periodic orbit returns within any horizon > period
      double horizon = std::max(min_height, 2 * flow.period + 1);
      // first scan step must clear the self-escape ball (unit speed)
      auto sep = min_separation_time(space, flow, horizon, 1e-3, 1.5e-3);
      if (!sep.empty() && sep[0] < horizon)
        throw NotFree("periodic flow rejected by separation probe");
      throw NotFree("no transversal interval system for a periodic flow");
    }
    case FlowSpec::Family::TilingHull:
      return build_hull_cover(space, flow, L, region);
    case FlowSpec::Family::TorusLinear: {
      if (flow.velocity.size() != 2)
        throw ParameterError("long thin covers implemented for 2-d torus flows");
      double v1 = flow.velocity[0], v2 = flow.velocity[1];
      if (!(v2 > 0)) throw ParameterError("need positive second velocity component");
      double T_r = 1.0 / v2, theta = frac(v1 / v2);
      auto tw = std::make_shared<TowerSystem>(build_towers(theta, T_r, min_height));
      // separation probe at the scale guaranteed by the interval exchange
      {
        double speed = std::hypot(v1, v2);
        double gap = 0.4 * tw->probe_gap / std::max(1.0, speed);
        double horizon = min_height + 2 * T_r;
        // step 1.5 gap/speed: clears the self-escape ball yet cannot stride
        // over a genuine return dip (width 2 gap/speed near distance 0)
        auto sep = min_separation_time(space, flow, horizon, gap, 1.5 * gap / speed);
        if (!sep.empty() && sep[0] < horizon)
          throw NotFree("flow failed the separation probe");
      }
      TransversalCoords coords = [v1, v2](const Pt& p) {
        double tau0 = p[1] / v2;
        return std::pair<double, double>(frac(p[0] - tau0 * v1), tau0);
      };
      auto tp = [](double u) { return Pt{u, 0.0}; };
      return assemble_rotation_cover(space, flow, L, region, tw, coords, tp);
    }
    case FlowSpec::Family::Suspension: {
      double T_r = flow.roof, theta = frac(flow.angle);
      auto tw = std::make_shared<TowerSystem>(build_towers(theta, T_r, min_height));
      {
        // single-orbit probe; base distance under the return map is y-independent
        SampledSpace probe = space;
        probe.points = {space.points.at(0)};
        probe.weights = {1.0};
        probe.regions.clear();
        probe.regions["all"] = {0};
        double gap = 0.4 * tw->probe_gap;
        double horizon = min_height + 2 * T_r;
        auto sep = min_separation_time(probe, flow, horizon, gap, 1.5 * gap);
        if (!sep.empty() && sep[0] < horizon)
          throw NotFree("flow failed the separation probe");
      }
      TransversalCoords coords = [T_r, theta](const Pt& p) {
        double u0 = frac(p[0]), tau0 = p[1];
        if (tau0 >= T_r - 1e-12) {
          tau0 = 0;
          u0 = frac(u0 + theta);
        }
        return std::pair<double, double>(u0, tau0);
      };
      auto tp = [](double u) { return Pt{u, 0.0}; };
      return assemble_rotation_cover(space, flow, L, region, tw, coords, tp);
    }
  }
  throw ParameterError("build_long_thin_cover: bad family");
}

// ---------------------------------------------------------------------------
// Partition pipeline

std::vector<ScalarField> smear_partition(const FlowSpec& flow,
                                         const std::vector<ScalarField>& pou, double lambda,
                                         double dt) {
  if (!(lambda > 0)) throw InvalidWindow("smear_partition: lambda must be positive");
  std::vector<ScalarField> out;
  out.reserve(pou.size());
  Window w = Window::uniform(-lambda, lambda, dt);
  for (const auto& f : pou) out.push_back(flow_average(flow, f, w));
  return out;
}

LipschitzMap cover_to_lipschitz_map(const SampledSpace& space, const FlowSpec& flow,
                                    const TubeCover& cover, double eta, double smear_dt) {
  int d = cover.num_colors - 1;
  LipschitzMap F;
  F.eta = eta;
  F.L = cover.L;
  F.cover = &cover;

  std::vector<ScalarField> tents;
  tents.reserve(cover.members.size());
  for (const auto& mem : cover.members) {
    auto phi = mem.phi;
    tents.emplace_back(space, [phi](const Pt& p) -> cplx { return phi(p); });
  }
  auto smeared = smear_partition(flow, tents, cover.L, smear_dt);

  // nerve over the lambda-stretched supports (smearing stretches supports)
  std::vector<std::vector<int>> stretched(cover.members.size());
  for (std::size_t mi = 0; mi < cover.members.size(); ++mi) {
    for (std::size_t i = 0; i < space.size(); ++i)
      if (cover.members[mi].in_stretched(space.points[i], cover.L))
        stretched[mi].push_back(static_cast<int>(i));
  }
  F.nerve_map = map_to_nerve(smeared, stretched);
  if (F.nerve_map.complex.dimension() > d + 1)
    throw ResolutionError("nerve dimension exceeds the color budget");
  return F;
}

ColoredPartition map_to_colored_partition(const SampledSpace& space, const LipschitzMap& F) {
  auto nm = std::make_shared<NerveMap>(F.nerve_map);
  ColoredPartition part;
  part.num_colors = nm->complex.dimension() + 1;
  part.flow_lipschitz = F.eta;

  std::vector<Simplex> sigmas(nm->complex.simplices.begin(), nm->complex.simplices.end());
  part.items.resize(sigmas.size());
  for (std::size_t s = 0; s < sigmas.size(); ++s) {
    auto& item = part.items[s];
    const Simplex sigma = sigmas[s];
    item.color = static_cast<int>(sigma.size()) - 1;
    item.name = "nu_sigma[";
    for (std::size_t k = 0; k < sigma.size(); ++k)
      item.name += (k ? "," : "") + std::to_string(sigma[k]);
    item.name += "]";
    item.box_member = sigma[0] < nm->complement_vertex ? sigma[0] : -1;
    item.phi = [nm, sigma](const Pt& p) {
      return canonical_partition(nm->complex, sigma, nm->at(p));
    };
    item.sampled.assign(space.size(), 0.0);
  }
  std::map<Simplex, std::size_t> index;
  for (std::size_t s = 0; s < sigmas.size(); ++s) index[sigmas[s]] = s;
  parallel_for(space.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      auto parts = canonical_partition_all(nm->complex, nm->at_sample(i));
      for (const auto& [sigma, x] : parts) part.items[index.at(sigma)].sampled[i] = x;
    }
  });
  return part;
}

ColoredPartition threshold_renormalize(const SampledSpace& space, const ColoredPartition& part,
                                       double eta_prime, double L) {
  if (!(eta_prime > 0) || !(L > 0)) throw ParameterError("threshold_renormalize: bad parameters");
  int d = part.num_colors - 1;
  double cut = 2 * eta_prime / L;
  if ((d + 1) * cut >= 1.0)
    throw ParameterError("threshold_renormalize: (d+1)*2*eta'/L >= 1, denominator can vanish");

  auto old_items = std::make_shared<std::vector<std::function<double(const Pt&)>>>();
  for (const auto& it : part.items) old_items->push_back(it.phi);

  ColoredPartition out;
  out.num_colors = part.num_colors;
  out.flow_lipschitz = eta_prime * (1 + (d + 1) * (2 - cut)) / ((1 - (d + 1) * cut) * (1 - (d + 1) * cut));

  std::size_t n = part.items.size();
  out.items.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    auto& item = out.items[s];
    item.color = part.items[s].color;
    item.box_member = part.items[s].box_member;
    item.name = part.items[s].name + "'";
    item.phi = [old_items, s, cut](const Pt& p) {
      double sum = 0, raw = 0, mine = 0;
      for (std::size_t k = 0; k < old_items->size(); ++k) {
        double x = (*old_items)[k](p);
        raw += x;
        double xp = std::max(0.0, x - cut);
        sum += xp;
        if (k == s) mine = xp;
      }
      double denom = sum + std::max(0.0, 1.0 - raw);
      return mine / denom;
    };
    item.sampled.assign(space.size(), 0.0);
  }
  parallel_for(space.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double sum = 0, raw = 0;
      for (std::size_t s = 0; s < n; ++s) {
        double x = part.items[s].sampled[i];
        raw += x;
        sum += std::max(0.0, x - cut);
      }
      double denom = sum + std::max(0.0, 1.0 - raw);
      for (std::size_t s = 0; s < n; ++s)
        out.items[s].sampled[i] = std::max(0.0, part.items[s].sampled[i] - cut) / denom;
    }
  });
  return out;
}

ColoredPartition cover_tent_partition(const SampledSpace& space, const TubeCover& cover) {
  ColoredPartition part;
  part.num_colors = cover.num_colors;
  part.flow_lipschitz = cover.phi_flow_lipschitz;
  part.items.resize(cover.members.size());
  for (std::size_t mi = 0; mi < cover.members.size(); ++mi) {
    auto& item = part.items[mi];
    item.phi = cover.members[mi].phi;
    item.color = cover.members[mi].color;
    item.box_member = static_cast<int>(mi);
    item.name = cover.members[mi].desc;
    item.sampled.assign(space.size(), 0.0);
  }
  parallel_for(space.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t mi = 0; mi < part.items.size(); ++mi)
        part.items[mi].sampled[i] = cover.members[mi].phi(space.points[i]);
  });
  return part;
}

Certificate tube_dimension_certificate(const SampledSpace& space, const FlowSpec& flow, int d,
                                       const std::vector<double>& L_list,
                                       const std::string& region) {
  Certificate cert;
  cert.name = "tube_dimension";
  cert.params["d"] = d;
  for (double L : L_list) {
    auto cover = build_long_thin_cover(space, flow, L, region);
    const auto& Kidx = space.region(region);
    std::string tag = "L=" + std::to_string(L);

    cert.add("colors(" + tag + ")", cover.num_colors, d + 1, 0);

    // (5a) every y in K has Phi_[-L,L](y) inside one member
    std::atomic<long long> uncovered{0};
    std::atomic<long long> mult_worst{0};
    std::atomic<long long> clash{0};
    parallel_for(Kidx.size(), [&](std::size_t lo, std::size_t hi) {
      long long unc = 0, mw = 0, cl = 0;
      for (std::size_t ii = lo; ii < hi; ++ii) {
        const Pt& y = space.points[Kidx[ii]];
        Pt ym = evolve(flow, y, -L), yp = evolve(flow, y, L);
        bool ok = false;
        long long mult = 0;
        std::array<long long, 8> per_color{};
        for (const auto& mem : cover.members) {
          if (mem.in_open(y)) ++mult;
          if (!ok && mem.in_open(ym) && mem.in_open(yp) && mem.in_open(y)) ok = true;
          if (mem.in_stretched(y, L)) ++per_color[mem.color];
        }
        if (!ok) ++unc;
        mw = std::max(mw, mult);
        // (5b) same-color members stay Phi_[-L,L]-separated
        for (int c = 0; c < cover.num_colors; ++c)
          if (per_color[c] > 1) ++cl;
      }
      uncovered += unc;
      clash += cl;
      long long cur = mult_worst.load();
      while (mw > cur && !mult_worst.compare_exchange_weak(cur, mw)) {
      }
    });
    cert.add("uncovered_fraction(" + tag + ")",
             static_cast<double>(uncovered) / std::max<std::size_t>(1, Kidx.size()), 0, 0);
    cert.add("multiplicity(" + tag + ")", static_cast<double>(mult_worst.load()), d + 1, 0);
    cert.add("same_color_overlaps(" + tag + ")", static_cast<double>(clash.load()), 0, 0);

    // every member sits inside a verified box
    int box_failures = 0;
    for (const auto& mem : cover.members)
      if (!verify_box(space, flow, mem.box, mem.box.margin / 4).passed()) ++box_failures;
    cert.add("box_failures(" + tag + ")", static_cast<double>(box_failures), 0, 0);
  }
  return cert;
}

void write_cover_csv(const std::string& path, const TubeCover& cover) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw UsageError("cannot open " + path);
  std::fprintf(fp, "member,color,sample\n");
  for (std::size_t mi = 0; mi < cover.members.size(); ++mi)
    for (int s : cover.members[mi].samples)
      std::fprintf(fp, "%zu,%d,%d\n", mi, cover.members[mi].color, s);
  std::fclose(fp);
}

}  // namespace flowdim
