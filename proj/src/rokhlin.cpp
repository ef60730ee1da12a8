#include "flowdim/rokhlin.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

namespace flowdim {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;
constexpr double kPhaseGate = 1e-6;  // |x| below this: order-zero outputs are 0

bool is_prime(int n) {
  if (n < 2) return false;
  for (int q = 2; q * q <= n; ++q)
    if (n % q == 0) return false;
  return true;
}

}  // namespace

double RokhlinWitness::max_defect() const {
  return std::max(std::max(delta_a, delta_b), std::max(delta_c, delta_d));
}

// ---------------------------------------------------------------------------
// witness from cover

RokhlinWitness witness_from_cover(const SampledSpace& space, const TubeCover& cover, double M,
                                  double T, double target_delta) {
  if (!(M > 0)) throw ParameterError("witness_from_cover: M must be positive");
  for (const auto& mem : cover.members)
    if (!mem.phi || !mem.a_plus_fast)
      throw BoxError("cover member lacks partition/exit-time evaluators: " + mem.desc);

  // detach the member closures from the cover's lifetime
  struct Piece {
    std::function<double(const Pt&)> phi, a_plus;
  };
  auto pieces = std::make_shared<std::vector<std::vector<Piece>>>(cover.num_colors);
  for (const auto& mem : cover.members)
    (*pieces)[mem.color].push_back({mem.phi, mem.a_plus_fast});

  RokhlinWitness w;
  w.M = M;
  w.p = kTwoPi / M;
  w.T = T;
  w.target_delta = target_delta;
  for (int l = 0; l < cover.num_colors; ++l) {
    // psi_i = phi_i^{1/2} exp(-(2 pi i / M) a_+); same-color supports disjoint
    auto eval = [pieces, l, M](const Pt& pt) -> cplx {
      cplx v = 0;
      for (const auto& pc : (*pieces)[l]) {
        double ph = pc.phi(pt);
        if (ph > 0)
          v += std::sqrt(ph) * std::polar(1.0, -(kTwoPi / M) * pc.a_plus(pt));
      }
      return v;
    };
    ScalarField xl(space);
    xl.exact = eval;
    parallel_for(space.size(), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) xl.v[i] = eval(space.points[i]);
    });
    w.x.push_back(std::move(xl));
  }
  ScalarField one(space, [](const Pt&) -> cplx { return 1.0; });
  w.test_set.push_back(std::move(one));
  return w;
}

// ---------------------------------------------------------------------------
// certification

Certificate certify_witness(const SampledSpace& space, const FlowSpec& flow,
                            RokhlinWitness& w, const std::vector<double>& t_grid) {
  if (w.x.empty()) throw UsageError("certify_witness: witness has no fields");
  if (w.test_set.empty()) throw UsageError("certify_witness: empty test set");
  for (double t : t_grid)
    if (std::abs(t) > w.T + 1e-12) throw UsageError("certify_witness: t_grid outside [-T, T]");

  std::size_t n = space.size();
  std::vector<double> acc_a(n, 0.0), acc_b(n, 0.0), acc_c(n, 0.0), acc_d(n, 0.0), sup(n, 0.0);

  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const Pt& y = space.points[i];
      double fmax = 0;
      for (const auto& f : w.test_set) fmax = std::max(fmax, std::abs(f.v[i]));
      double ssum = 0;
      for (const auto& xl : w.x) {
        double r = std::abs(xl.v[i]);
        ssum += r * r;
        sup[i] = std::max(sup[i], r);
        // commutators, computed literally: zero in a function algebra
        cplx xv = xl.v[i];
        for (const auto& f : w.test_set)
          acc_c[i] = std::max(acc_c[i], std::abs(xv * f.v[i] - f.v[i] * xv));
        acc_d[i] = std::max(acc_d[i], fmax * std::abs(xv * std::conj(xv) - std::conj(xv) * xv));
      }
      acc_b[i] = fmax * std::abs(1.0 - ssum);
      for (double t : t_grid) {
        Pt ym = evolve(flow, y, -t);
        cplx rot = std::polar(1.0, -w.p * t);
        for (const auto& xl : w.x)
          acc_a[i] = std::max(acc_a[i], fmax * std::abs(xl.eval(ym) - rot * xl.v[i]));
      }
    }
  });

  auto vmax = [](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m = std::max(m, x);
    return m;
  };
  w.delta_a = vmax(acc_a);
  w.delta_b = vmax(acc_b);
  w.delta_c = vmax(acc_c);
  w.delta_d = vmax(acc_d);

  Certificate cert;
  cert.name = "rokhlin_witness";
  cert.params["p"] = w.p;
  cert.params["M"] = w.M;
  cert.params["T"] = w.T;
  cert.params["t_grid_size"] = static_cast<double>(t_grid.size());
  cert.params["d"] = static_cast<double>(w.d());
  cert.add("condition_a_equivariance", w.delta_a, w.target_delta, 1e-9);
  cert.add("condition_b_completeness", w.delta_b, w.target_delta, 1e-9);
  cert.add("condition_c_test_commutator", w.delta_c, 0.0, 0.0);
  cert.add("condition_d_normality", w.delta_d, 0.0, 0.0);
  cert.add("contraction_sup_norm", vmax(sup), 1.0, 1e-12);
  return cert;
}

// ---------------------------------------------------------------------------
// order-zero functional calculus

ScalarField order_zero_apply(const SampledSpace& space, const ScalarField& x,
                             const std::function<cplx(double)>& f, double M) {
  if (!(M > 0)) throw ParameterError("order_zero_apply: M must be positive");
  auto apply = [f, M](cplx v) -> cplx {
    double r = std::abs(v);
    if (r <= kPhaseGate) return 0.0;
    return r * r * f(M * std::arg(v) / kTwoPi);
  };
  ScalarField out(space);
  if (x.exact) {
    auto xe = x.exact;
    out.exact = [xe, apply](const Pt& p) -> cplx { return apply(xe(p)); };
  }
  parallel_for(space.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) out.v[i] = apply(x.v[i]);
  });
  return out;
}

// ---------------------------------------------------------------------------
// eigenframe

Eigenframe eigenframe_from_witness(const SampledSpace& space, const FlowSpec& flow,
                                   const RokhlinWitness& w) {
  if (w.delta_a < 0) throw UsageError("eigenframe_from_witness: witness not certified");
  Eigenframe e;
  e.p = w.p;
  e.T = w.T;
  int d = w.d();
  for (int l = 0; l <= d; ++l) {
    double k = static_cast<double>(l + 1);
    double M = w.M;
    e.x.push_back(order_zero_apply(
        space, w.x[l], [k, M](double u) -> cplx { return std::polar(1.0, kTwoPi * k * u / M); },
        M));
    e.freq.push_back(k * w.p);
  }

  // residuals over the witness test set; frequency (l+1)p per index
  std::size_t n = space.size();
  std::vector<double> acc_eq(n, 0.0), acc_comp(n, 0.0);
  std::vector<double> t_grid;
  for (int j = -8; j <= 8; ++j) t_grid.push_back(w.T * j / 8.0);
  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double fmax = 0;
      for (const auto& f : w.test_set) fmax = std::max(fmax, std::abs(f.v[i]));
      // hat completeness: the order-zero hats mu~^(l)(1) = |x^(l)|^2 sum to 1
      double ssum = 0;
      for (const auto& xl : w.x) ssum += std::norm(xl.v[i]);
      acc_comp[i] = fmax * std::abs(1.0 - ssum);
      for (double t : t_grid) {
        Pt ym = evolve(flow, space.points[i], -t);
        for (int l = 0; l <= d; ++l) {
          cplx rot = std::polar(1.0, -e.freq[l] * t);
          acc_eq[i] = std::max(acc_eq[i], fmax * std::abs(e.x[l].eval(ym) - rot * e.x[l].v[i]));
        }
      }
    }
  });
  for (double v : acc_eq) e.delta_eq = std::max(e.delta_eq, v);
  for (double v : acc_comp) e.delta_comp = std::max(e.delta_comp, v);
  return e;
}

// ---------------------------------------------------------------------------
// discrete towers

DiscreteTowers discrete_towers(const SampledSpace& space, const FlowSpec& flow,
                               const RokhlinWitness& w, double t, int n, double epsilon) {
  if (!is_prime(n)) throw ParameterError("discrete_towers: n must be prime");
  if (!(t > 0)) throw ParameterError("discrete_towers: t must be positive");
  double alpha = frac(t / w.M);
  // rational dependence of t and M: some q <= n with q*alpha integral
  for (int q = 1; q <= n; ++q) {
    double qa = q * alpha;
    if (std::abs(qa - std::llround(qa)) < 1e-9)
      throw ParameterError("discrete_towers: t/M rationally dependent at denominator " +
                           std::to_string(q));
  }
  long long pn = std::llround(n * alpha) % n;
  if (std::gcd(pn, static_cast<long long>(n)) != 1)
    throw ParameterError("discrete_towers: degenerate rational approximation");

  DiscreteTowers dt;
  dt.t = t;
  dt.n = n;
  dt.p_num = pn;
  int d = w.d();

  // b_j^(i): PL hat at node j p'/n + i/(2n) on the unit circle (u scaled by M),
  // half-width 1/(2n): all 2n hats tile the circle with sum exactly 1
  auto hat = [n](double u, double center) {
    double dist = circ_norm(u - center);
    return std::max(0.0, 1.0 - 2.0 * n * dist);
  };
  dt.fields.resize(2);
  for (int i = 0; i < 2; ++i) {
    dt.fields[i].resize(n);
    for (int j = 0; j < n; ++j) {
      double center = frac(static_cast<double>(j) * pn / n + 0.5 * i / n);
      double M = w.M;
      for (int l = 0; l <= d; ++l)
        dt.fields[i][j].push_back(order_zero_apply(
            space, w.x[l],
            [hat, center, M](double u) -> cplx { return hat(u / M, center); }, M));
    }
  }

  // the four bullet residuals, sup over samples and the witness test set
  std::size_t ns = space.size();
  std::vector<double> acc_sum(ns, 0.0), acc_shift(ns, 0.0), acc_wrap(ns, 0.0), acc_orth(ns, 0.0);
  parallel_for(ns, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t idx = lo; idx < hi; ++idx) {
      double fmax = 0;
      for (const auto& f : w.test_set) fmax = std::max(fmax, std::abs(f.v[idx]));
      double total = 0;
      Pt ym = evolve(flow, space.points[idx], -t);
      for (int i = 0; i < 2; ++i)
        for (int l = 0; l <= d; ++l) {
          for (int j = 0; j < n; ++j) {
            total += dt.fields[i][j][l].v[idx].real();
            double shift =
                fmax * std::abs(dt.fields[i][(j + 1) % n][l].v[idx] - dt.fields[i][j][l].eval(ym));
            if (j + 1 < n)
              acc_shift[idx] = std::max(acc_shift[idx], shift);
            else
              acc_wrap[idx] = std::max(acc_wrap[idx], shift);
            for (int j2 = j + 1; j2 < n; ++j2)
              acc_orth[idx] = std::max(
                  acc_orth[idx],
                  fmax * std::abs(dt.fields[i][j][l].v[idx] * dt.fields[i][j2][l].v[idx]));
          }
        }
      acc_sum[idx] = fmax * std::abs(1.0 - total);
    }
  });
  auto vmax = [](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m = std::max(m, x);
    return m;
  };
  double db = std::max(0.0, w.delta_b);
  dt.cert.name = "discrete_towers";
  dt.cert.params["t"] = t;
  dt.cert.params["n"] = static_cast<double>(n);
  dt.cert.params["p_num"] = static_cast<double>(pn);
  dt.cert.params["epsilon"] = epsilon;
  dt.cert.add("tower_completeness", vmax(acc_sum), db + epsilon, 1e-9);
  dt.cert.add("tower_shift", vmax(acc_shift), 2 * epsilon, 1e-9);
  dt.cert.add("tower_wrap", vmax(acc_wrap), 2 * epsilon, 1e-9);
  dt.cert.add("tower_orthogonality", vmax(acc_orth), epsilon, 1e-9);
  return dt;
}

// ---------------------------------------------------------------------------
// box extraction

double witness_delta_budget(int d, double epsilon) {
  double s = std::sqrt(static_cast<double>(d) + 2.0);
  double radial = 1.0 / (3.0 * s);
  double sa = std::sin(kTwoPi * epsilon);
  double angular = sa * (2.0 / (3.0 * s)) / (1.0 + sa);
  return std::min(1.0 / (d + 2.0), 0.999 * std::min(radial, angular));
}

namespace {

// One phase-averaged field xi^(l,sigma) and the derived box geometry.
struct XiField {
  std::function<cplx(const Pt&)> x;  // sigma * x^(l)
  double M = 0;                      // = 8L
  double eps = 0;
  double inner1 = 0;  // D_1 inner radius 2/(3 sqrt(d+2))
  double inner2 = 0;  // D_2 inner radius 1/(3 sqrt(d+2))
  FlowSpec flow;

  // g of (D-g): 1 on D_1, 0 off D_2, separable in angle and radius
  double g(cplx z) const {
    double r = std::abs(z);
    double hr = std::clamp((r - inner2) / (inner1 - inner2), 0.0, 1.0);
    if (hr <= 0) return 0.0;
    double th = std::abs(std::arg(z)) / kTwoPi;
    double ht = std::clamp(2.0 - th / eps, 0.0, 1.0);
    return hr * ht;
  }

  // phase-zero orbit time: the x-phase advances at exact rate 1/M along orbits
  bool s_star(const Pt& p, double& out) const {
    cplx v = x(p);
    if (std::abs(v) <= kPhaseGate) return false;
    out = -M * std::arg(v) / kTwoPi;
    return true;
  }

  // quadrature window anchored at s*: nodes translate exactly with the orbit,
  // making the averaged field exactly equivariant at working precision
  cplx xi(const Pt& p, double& s0) const {
    if (!s_star(p, s0)) return 0.0;
    const int N = 225;
    double W = 7.0 * eps * M;  // support is |s - s*| <= (2 eps + slack) M
    double h = W / (N - 1);
    cplx acc = 0.0;
    for (int k = 0; k < N; ++k) {
      double s = s0 - W / 2 + k * h;
      if (std::abs(s) > M / 2) continue;  // the true window is [-M/2, M/2]
      double gam = g(x(evolve(flow, p, s)));
      if (gam == 0.0) continue;
      double wgt = (k == 0 || k == N - 1) ? 0.5 : 1.0;
      acc += wgt * gam * std::polar(1.0, kTwoPi * s / M);
    }
    return acc * (h / M);
  }
};

}  // namespace

TubeCover boxes_from_witness(const SampledSpace& space, const FlowSpec& flow,
                             const RokhlinWitness& w, double L, const std::string& region) {
  if (!(L > 0)) throw ParameterError("boxes_from_witness: L must be positive");
  double eps = 1.0 / 96.0;
  double M = 8 * L;
  if (std::abs(w.M - M) > 1e-9 * (1 + M))
    throw ParameterError("boxes_from_witness: witness must be certified at M = 8L");
  if (w.T < M - 1e-9) throw ParameterError("boxes_from_witness: witness horizon below 8L");
  if (w.delta_a < 0) throw UsageError("boxes_from_witness: witness not certified");
  int d = w.d();
  double budget = witness_delta_budget(d, eps);
  if (w.max_defect() > budget)
    throw DefectBudgetExceeded("witness defect " + std::to_string(w.max_defect()) +
                               " exceeds budget " + std::to_string(budget));

  double s_dim = std::sqrt(static_cast<double>(d) + 2.0);
  double length = (1 - 16 * eps) * M;  // (1 - 16 eps) 8L
  double margin = 4 * eps * M;
  double lam_cut = 0.5 - 8 * eps;       // V boundary in Lambda units
  double lam_valid = 0.5 - 3.5 * eps;   // time_coord validity (off the branch cut)
  double t_orbit = (0.5 - 4 * eps) * M; // orbit-interval half-width of (D-B)

  TubeCover cover;
  cover.L = L;
  cover.region = region;
  cover.phi_flow_lipschitz = 0;
  const auto& Kidx = space.region(region);

  for (int l = 0; l <= d; ++l) {
    for (int si = 0; si < 2; ++si) {
      double sigma = si == 0 ? 1.0 : -1.0;
      auto xfield = std::make_shared<XiField>();
      if (w.x[l].exact) {
        auto xe = w.x[l].exact;
        xfield->x = [xe, sigma](const Pt& p) -> cplx { return sigma * xe(p); };
      } else {
        ScalarField xl = w.x[l];
        xfield->x = [xl, sigma](const Pt& p) -> cplx { return sigma * xl.eval(p); };
      }
      xfield->M = M;
      xfield->eps = eps;
      xfield->inner1 = 2.0 / (3.0 * s_dim);
      xfield->inner2 = 1.0 / (3.0 * s_dim);
      xfield->flow = flow;

      // p lies on the box tube iff xi(p) has polar part in the Lambda window
      // and the phase-zero orbit point sits in Delta_1 within the (D-B) window
      auto locate = [xfield, t_orbit, M](const Pt& p, double slack) -> std::optional<double> {
        double s0;
        cplx z = xfield->xi(p, s0);
        if (std::abs(z) < 1e-9) return std::nullopt;
        double lam = std::arg(z) / kTwoPi;
        bool anchored = false;
        for (double dl : {0.0, 0.5, -0.5, 1.0, -1.0}) {
          double s = s0 + dl * xfield->eps * M;
          if (std::abs(s) > t_orbit + slack) continue;
          cplx xv = xfield->x(evolve(xfield->flow, p, s));
          double th = std::abs(std::arg(xv)) / kTwoPi;
          if (std::abs(xv) >= xfield->inner1 && th <= xfield->eps + 1e-12) {
            anchored = true;
            break;
          }
        }
        if (!anchored) return std::nullopt;
        return lam;
      };

      TubeMember mem;
      mem.color = static_cast<int>(cover.members.size());
      mem.desc = "witness box l=" + std::to_string(l) + (si == 0 ? " sigma=+" : " sigma=-");
      mem.in_open = [locate, lam_cut](const Pt& p) {
        auto lam = locate(p, 0.0);
        return lam && std::abs(*lam) < lam_cut;
      };
      mem.in_stretched = [locate, lam_cut, M](const Pt& p, double S) {
        auto lam = locate(p, S);
        return lam && std::abs(*lam) * M <= lam_cut * M + S + 1e-9;
      };
      mem.a_plus_fast = [locate, lam_cut, M](const Pt& p) {
        auto lam = locate(p, 0.0);
        if (!lam) throw BoxError("a_plus outside witness box");
        return M * (*lam + lam_cut);
      };
      mem.box.length = length;
      mem.box.margin = margin;
      mem.box.desc = mem.desc;
      mem.box.time_coord = [locate, lam_valid, M](const Pt& p) -> std::optional<double> {
        auto lam = locate(p, 0.0);
        if (!lam || std::abs(*lam) >= lam_valid) return std::nullopt;
        return -M * (*lam);
      };

      // member samples and slice parametrization (orbit-translate to Lambda = 0)
      std::vector<std::vector<int>> hits(thread_count());
      std::atomic<int> slot{0};
      parallel_for(Kidx.size(), [&](std::size_t lo, std::size_t hi) {
        int me = slot.fetch_add(1);
        for (std::size_t k = lo; k < hi; ++k)
          if (mem.in_open(space.points[Kidx[k]])) hits[me].push_back(Kidx[k]);
      });
      for (auto& hv : hits) mem.samples.insert(mem.samples.end(), hv.begin(), hv.end());
      std::sort(mem.samples.begin(), mem.samples.end());
      if (mem.samples.empty()) continue;  // empty section: no box needed

      std::size_t stride = std::max<std::size_t>(1, mem.samples.size() / 33);
      for (std::size_t k = 0; k < mem.samples.size() && mem.box.slice_samples.size() < 33;
           k += stride) {
        const Pt& y = space.points[mem.samples[k]];
        double s0;
        cplx z = xfield->xi(y, s0);
        if (std::abs(z) < 1e-9) continue;
        mem.box.slice_samples.push_back(evolve(flow, y, M * std::arg(z) / kTwoPi));
      }
      if (mem.box.slice_samples.empty())
        throw ResolutionError("no slice parametrization for " + mem.desc);
      cover.members.push_back(std::move(mem));
    }
  }
  cover.num_colors = static_cast<int>(cover.members.size());
  if (cover.num_colors == 0) throw ResolutionError("witness produced no nonempty boxes");
  return cover;
}

// ---------------------------------------------------------------------------
// serialization

void write_witness(const std::string& path_prefix, const RokhlinWitness& w) {
  nlohmann::ordered_json j;
  j["p"] = w.p;
  j["M"] = w.M;
  j["T"] = w.T;
  j["d"] = w.d();
  j["target_delta"] = w.target_delta;
  j["delta_a"] = w.delta_a;
  j["delta_b"] = w.delta_b;
  j["delta_c"] = w.delta_c;
  j["delta_d"] = w.delta_d;
  std::FILE* jf = std::fopen((path_prefix + ".json").c_str(), "w");
  if (!jf) throw UsageError("cannot open " + path_prefix + ".json");
  std::string text = j.dump(2);
  std::fwrite(text.data(), 1, text.size(), jf);
  std::fclose(jf);

  std::FILE* cf = std::fopen((path_prefix + ".csv").c_str(), "w");
  if (!cf) throw UsageError("cannot open " + path_prefix + ".csv");
  std::fprintf(cf, "index");
  if (!w.x.empty() && w.x[0].space)
    for (std::size_t dco = 0; dco < w.x[0].space->points[0].size(); ++dco)
      std::fprintf(cf, ",x%zu", dco);
  for (std::size_t l = 0; l < w.x.size(); ++l) std::fprintf(cf, ",re%zu,im%zu", l, l);
  std::fprintf(cf, "\n");
  if (!w.x.empty() && w.x[0].space) {
    const SampledSpace& sp = *w.x[0].space;
    for (std::size_t i = 0; i < sp.size(); ++i) {
      std::fprintf(cf, "%zu", i);
      for (double c : sp.points[i]) std::fprintf(cf, ",%.17g", c);
      for (const auto& xl : w.x)
        std::fprintf(cf, ",%.17g,%.17g", xl.v[i].real(), xl.v[i].imag());
      std::fprintf(cf, "\n");
    }
  }
  std::fclose(cf);
}

}  // namespace flowdim
