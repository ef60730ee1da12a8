#include "flowdim/crossprod.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

namespace flowdim {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

void check_compatible(const ConvolutionElement& f, const ConvolutionElement& g) {
  if (f.space != g.space || f.size() != g.size() || std::abs(f.dt - g.dt) > 1e-15)
    throw UsageError("convolution elements live on different grids");
}

int grid_points(double t_max, double dt) { return 2 * static_cast<int>(std::llround(t_max / dt)) + 1; }

}  // namespace

int ConvolutionElement::index_of(double t) const {
  double u = (t + t_max) / dt;
  long long i = std::llround(u);
  if (i < 0 || i >= size() || std::abs(u - i) > 1e-6) return -1;
  return static_cast<int>(i);
}

double ConvolutionElement::l1_norm() const {
  double s = 0;
  for (const auto& f : values) s += f.sup_norm();
  return s * dt;
}

double ConvolutionElement::sup_norm() const {
  double s = 0;
  for (const auto& f : values) s = std::max(s, f.sup_norm());
  return s;
}

std::pair<int, int> ConvolutionElement::support() const {
  double top = sup_norm();
  double thr = 1e-10 * top;
  int lo = size(), hi = -1;
  if (top == 0) return {lo, hi};
  for (int i = 0; i < size(); ++i)
    if (values[i].sup_norm() > thr) {
      if (lo == size()) lo = i;
      hi = i;
    }
  return {lo, hi};
}

ConvolutionElement zero_element(const SampledSpace& space, const FlowSpec& flow, double t_max,
                                double dt) {
  if (!(dt > 0) || !(t_max > 0)) throw ParameterError("element grid must be positive");
  ConvolutionElement e;
  e.space = &space;
  e.flow = flow;
  e.dt = dt;
  int n = grid_points(t_max, dt);
  e.t_max = (n - 1) / 2 * dt;
  e.values.assign(n, ScalarField(space));
  return e;
}

ConvolutionElement tensor_element(const SampledSpace& space, const FlowSpec& flow, double t_max,
                                  double dt, const std::function<cplx(double)>& profile,
                                  const ScalarField& field) {
  auto e = zero_element(space, flow, t_max, dt);
  for (int i = 0; i < e.size(); ++i) {
    cplx c = profile(e.time_at(i));
    if (c == 0.0) continue;
    ScalarField f = field;
    for (auto& v : f.v) v *= c;
    if (field.exact) {
      auto fe = field.exact;
      f.exact = [fe, c](const Pt& p) { return c * fe(p); };
    }
    e.values[i] = std::move(f);
  }
  return e;
}

ConvolutionElement add(const ConvolutionElement& f, const ConvolutionElement& g) {
  check_compatible(f, g);
  ConvolutionElement h = f;
  for (int i = 0; i < h.size(); ++i) {
    for (std::size_t j = 0; j < h.values[i].v.size(); ++j) h.values[i].v[j] += g.values[i].v[j];
    h.values[i].exact = nullptr;  // sums of grid elements are grid-born
  }
  return h;
}

ConvolutionElement subtract(const ConvolutionElement& f, const ConvolutionElement& g) {
  return add(f, scale(g, -1.0));
}

ConvolutionElement scale(const ConvolutionElement& f, cplx c) {
  ConvolutionElement h = f;
  for (auto& fld : h.values) {
    for (auto& v : fld.v) v *= c;
    if (fld.exact) {
      auto fe = fld.exact;
      fld.exact = [fe, c](const Pt& p) { return c * fe(p); };
    }
  }
  return h;
}

ConvolutionElement convolve(const ConvolutionElement& f, const ConvolutionElement& g) {
  check_compatible(f, g);
  auto [fi0, fi1] = f.support();
  auto [gj0, gj1] = g.support();
  ConvolutionElement h = zero_element(*f.space, f.flow, f.t_max, f.dt);
  if (fi1 < 0 || gj1 < 0) return h;
  double lo = f.time_at(fi0) + g.time_at(gj0), hi = f.time_at(fi1) + g.time_at(gj1);
  if (lo < -f.t_max - f.dt / 2 || hi > f.t_max + f.dt / 2)
    throw WindowExceeded("convolution support leaves the time grid");

  const SampledSpace& sp = *f.space;
  int klo = static_cast<int>(std::floor((lo + f.t_max) / f.dt));
  int khi = static_cast<int>(std::ceil((hi + f.t_max) / f.dt));
  klo = std::max(klo, 0);
  khi = std::min(khi, h.size() - 1);

  parallel_for(static_cast<std::size_t>(khi - klo + 1), [&](std::size_t a, std::size_t b) {
    for (std::size_t kk = a; kk < b; ++kk) {
      int k = klo + static_cast<int>(kk);
      auto& out = h.values[k].v;
      for (int i = fi0; i <= fi1; ++i) {
        int j = k - i + (f.size() - 1) / 2;  // index with time_at(j) = t - s_i
        if (j < gj0 || j > gj1) continue;
        const ScalarField& fs = f.values[i];
        const ScalarField& gu = g.values[j];
        if (fs.sup_norm() == 0 || gu.sup_norm() == 0) continue;
        double s = f.time_at(i);
        for (std::size_t m = 0; m < sp.size(); ++m) {
          cplx a1 = fs.v[m];
          if (a1 == 0.0) continue;
          out[m] += a1 * gu.eval(evolve(f.flow, sp.points[m], -s));
        }
      }
      for (auto& v : out) v *= f.dt;
    }
  });
  return h;
}

ConvolutionElement adjoint(const ConvolutionElement& f) {
  ConvolutionElement h = zero_element(*f.space, f.flow, f.t_max, f.dt);
  const SampledSpace& sp = *f.space;
  for (int i = 0; i < f.size(); ++i) {
    double t = h.time_at(i);
    const ScalarField& src = f.values[f.size() - 1 - i];  // f(-t)
    if (src.sup_norm() == 0 && !src.exact) continue;
    for (std::size_t m = 0; m < sp.size(); ++m)
      h.values[i].v[m] = std::conj(src.eval(evolve(f.flow, sp.points[m], -t)));
    if (src.exact) {
      auto se = src.exact;
      auto flow = f.flow;
      h.values[i].exact = [se, flow, t](const Pt& p) {
        return std::conj(se(evolve(flow, p, -t)));
      };
    }
  }
  return h;
}

cplx trace(const ConvolutionElement& f) {
  int i0 = f.index_of(0.0);
  if (i0 < 0) throw UsageError("trace: grid has no t = 0 node");
  return invariant_integral(*f.space, f.values[i0]);
}

double spectral_sup(const ConvolutionElement& f) {
  int n = f.size();
  std::vector<cplx> beta(n);
  for (int i = 0; i < n; ++i) beta[i] = f.values[i].v.empty() ? 0.0 : f.values[i].v[0];
  double best = 0;
  for (int k = -n / 2; k <= n / 2; ++k) {
    double xi = static_cast<double>(k) / (n * f.dt);
    cplx acc = 0;
    for (int i = 0; i < n; ++i) acc += beta[i] * std::polar(1.0, -kTwoPi * f.time_at(i) * xi);
    best = std::max(best, std::abs(acc) * f.dt);
  }
  return best;
}

// ---------------------------------------------------------------------------
// projections

namespace {

// shared residual block: p~ - p and p*p - p in L1 and sup
void projection_residuals(Certificate& cert, const ConvolutionElement& p, double dt, double dx,
                          double r) {
  auto padj = adjoint(p);
  auto pp = convolve(p, p);
  auto d_adj = subtract(padj, p);
  auto d_idem = subtract(pp, p);
  double bound = 12.0 * (dt + dx) / r;  // first-order grid error, measured constant < 12
  cert.add("adjoint_residual_l1", d_adj.l1_norm(), bound, 1e-12);
  cert.add("adjoint_residual_sup", d_adj.sup_norm(), bound, 1e-12);
  cert.add("idempotent_residual_l1", d_idem.l1_norm(), bound, 1e-12);
  cert.add("idempotent_residual_sup", d_idem.sup_norm(), bound, 1e-12);
  double tr = trace(p).real();
  cert.params["trace_p"] = tr;
  cert.add("trace_positive", tr > 1e-9 ? 0.0 : 1.0, 0, 0);
}

}  // namespace

ProjectionResult transversal_projection(const SampledSpace& space, const FlowSpec& flow,
                                        const std::string& region, double r, double dt) {
  if (flow.family != FlowSpec::Family::TorusLinear)
    throw ParameterError("transversal projection: linear torus flows only");
  if (!(r > 0) || !(dt > 0) || dt > r / 4) throw ParameterError("need 0 < dt <= r/4");
  double v2 = flow.velocity[1];
  double dx = 1.0 / std::sqrt(static_cast<double>(space.size()));

  // no point of X = {x2 = 0} may return to X within (0, 3r]; the flow is
  // translation invariant so one orbit decides. The scan starts past the
  // self-escape ball of radius ~dx.
  for (double t = 2.5 * dx; t <= 3 * r + 1e-12; t += dx / 2)
    if (circ_norm(t * v2) < 1.5 * dx * v2 && t * v2 > 2 * dx * v2)
      throw NotTransversal("X returns to itself at t = " + std::to_string(t));

  // bump in the flow distance to X and its orbit normalizer
  auto tau0 = [v2](const Pt& p) { return centered_frac(p[1]) / v2; };
  auto bump = [tau0, r](const Pt& p) { return std::max(0.0, 1.0 - std::abs(tau0(p)) / r); };
  auto g_exact = [bump, flow, r, dt](const Pt& p) -> double {
    double f = bump(p);
    if (f <= 0) return 0.0;
    double I = 0;
    int n = static_cast<int>(std::ceil(4 * r / dt));
    for (int k = 0; k <= n; ++k) {
      double t = -2 * r + 4 * r * k / n;
      double w = (k == 0 || k == n) ? 0.5 : 1.0;
      I += w * bump(evolve(flow, p, t));
    }
    I *= 4 * r / n;
    return std::sqrt(f / I);
  };
  ScalarField g(space);  // grid-born: interpolation keeps residuals first order
  parallel_for(space.size(), [&](std::size_t a, std::size_t b) {
    for (std::size_t m = a; m < b; ++m) g.v[m] = g_exact(space.points[m]);
  });

  double t_max = 4 * r + 2 * dt;
  auto p = zero_element(space, flow, t_max, dt);
  parallel_for(space.size(), [&](std::size_t a, std::size_t b) {
    for (std::size_t m = a; m < b; ++m) {
      const Pt& y = space.points[m];
      double gy = g.v[m].real();
      if (gy == 0) continue;
      for (int i = 0; i < p.size(); ++i) {
        double t = p.time_at(i);
        if (std::abs(t) > 2 * r) continue;
        p.values[i].v[m] = gy * g.eval(evolve(flow, y, -t));
      }
    }
  });

  ProjectionResult res;
  res.p = std::move(p);
  res.cert.name = "transversal_projection:" + region;
  res.cert.l1_norm_semantics = true;
  res.cert.params["r"] = r;
  res.cert.params["dt"] = dt;
  res.cert.params["dx"] = dx;

  // orthogonality at the support edge, on the construction side (chart-exact)
  double worst = 0;
  for (std::size_t m = 0; m < space.size(); m += 3) {
    const Pt& y = space.points[m];
    double gy = g_exact(y);
    if (gy == 0) continue;
    worst = std::max(worst, gy * g_exact(evolve(flow, y, 2 * r)));
    worst = std::max(worst, gy * g_exact(evolve(flow, y, -2 * r)));
  }
  res.cert.add("orthogonality_at_2r", worst, 0, 1e-12);

  projection_residuals(res.cert, res.p, dt, dx, r);
  return res;
}

ProjectionResult tiling_projection(const SampledSpace& space, const FlowSpec& flow, double r,
                                   double dt) {
  if (flow.family != FlowSpec::Family::TilingHull)
    throw ParameterError("tiling projection: hull flows only");
  if (!(r > 0) || !(dt > 0) || dt > r / 4) throw ParameterError("need 0 < dt <= r/4");

  std::vector<double> lambda;  // left endpoints of the a tiles
  for (const auto& t : space.tiles)
    if (t.type == 'a') lambda.push_back(t.start);
  if (lambda.size() < 2) throw ParameterError("tiling window holds too few a-tiles");
  for (std::size_t i = 0; i + 1 < lambda.size(); ++i)
    if (lambda[i + 1] - lambda[i] < 6 * r)
      throw ParameterError("two Lambda points share a 3r-ball");

  double span = std::abs(space.points.back()[0]);
  if (span + 4 * r + dt > flow.window_radius)
    throw ParameterError("sample span too close to the hull window for 4r evolution");

  double c = std::sqrt(3.0 / (2.0 * r));  // int |f|^2 = 1 for the tent c(1-|s|/r)
  auto f_bump = [c, r](double u) { return c * std::max(0.0, 1.0 - std::abs(u) / r); };
  auto g_exact = [&lambda, f_bump](double s) {
    auto it = std::lower_bound(lambda.begin(), lambda.end(), s);
    double v = 0;
    if (it != lambda.end()) v = std::max(v, f_bump(s - *it));
    if (it != lambda.begin()) {
      --it;
      v = std::max(v, f_bump(s - *it));
    }
    return v;
  };
  ScalarField g(space);
  for (std::size_t m = 0; m < space.size(); ++m) g.v[m] = g_exact(space.points[m][0]);

  // grid-born evaluation, falling back to the chart formula just past the
  // sampled span so convolutions may leave it by up to 4r
  double dx_g = space.points[1][0] - space.points[0][0];
  double span_safe = span - 2 * dx_g;
  auto gv = std::make_shared<std::vector<cplx>>(g.v);
  const SampledSpace* spp = &space;
  auto eval_g = [gv, spp, span_safe, g_exact](double s) -> double {
    if (std::abs(s) <= span_safe) return interpolate(*spp, *gv, {s}).real();
    return g_exact(s);
  };

  double t_max = 4 * r + 2 * dt;
  auto p = zero_element(space, flow, t_max, dt);
  for (std::size_t m = 0; m < space.size(); ++m) {
    double s = space.points[m][0];
    double gy = g.v[m].real();
    if (gy == 0) continue;
    for (int i = 0; i < p.size(); ++i) {
      double t = p.time_at(i);
      if (std::abs(t) > 2 * r) continue;
      p.values[i].v[m] = gy * eval_g(s - t);
    }
  }
  // in-span queries interpolate the stored samples (grid-born, first-order
  // residuals); the chart product only covers the fallback strip past the span
  for (int i = 0; i < p.size(); ++i) {
    double t = p.time_at(i);
    if (std::abs(t) > 2 * r) continue;
    auto vi = std::make_shared<std::vector<cplx>>(p.values[i].v);
    p.values[i].exact = [vi, spp, span_safe, eval_g, t](const Pt& q) -> cplx {
      if (std::abs(q[0]) <= span_safe) return interpolate(*spp, *vi, q);
      return eval_g(q[0]) * eval_g(q[0] - t);
    };
  }

  ProjectionResult res;
  res.p = std::move(p);
  res.cert.name = "tiling_projection";
  res.cert.l1_norm_semantics = true;
  res.cert.params["r"] = r;
  res.cert.params["dt"] = dt;
  double dx = space.points[1][0] - space.points[0][0];
  res.cert.params["dx"] = dx;

  // boundary support: p vanishes identically at |t| = 2r (construction side)
  double worst = 0;
  for (std::size_t m = 0; m < space.size(); m += 3) {
    double s = space.points[m][0];
    worst = std::max(worst, g_exact(s) * g_exact(s - 2 * r));
    worst = std::max(worst, g_exact(s) * g_exact(s + 2 * r));
  }
  res.cert.add("boundary_zero_at_2r", worst, 0, 1e-12);

  // pattern equivariance: equal r-patches around Lambda points give equal g
  double eqv = 0;
  for (std::size_t i = 0; i + 1 < lambda.size(); ++i)
    for (double u = -r; u <= r + 1e-12; u += r / 4)
      eqv = std::max(eqv, std::abs(g_exact(lambda[i] + u) - g_exact(lambda[i + 1] + u)));
  res.cert.add("pattern_equivariance", eqv, 0, 1e-12);

  projection_residuals(res.cert, res.p, dt, dx, r);
  return res;
}

// ---------------------------------------------------------------------------
// time-window functions and the stability witness

double TimeWindowFunction::l1_norm() const {
  double s = 0;
  for (const auto& v : values) s += std::abs(v);
  return s * dt;
}

TimeWindowFunction modulate(const TimeWindowFunction& h, double t0) {
  TimeWindowFunction m = h;
  for (int i = 0; i < m.size(); ++i) m.values[i] *= std::polar(1.0, kTwoPi * t0 * m.time_at(i));
  if (h.exact) {
    auto he = h.exact;
    m.exact = [he, t0](double s) { return std::polar(1.0, kTwoPi * t0 * s) * he(s); };
  }
  return m;
}

TimeWindowFunction band_limited_window(double nu, double t_max, double dt) {
  if (!(nu > 0)) throw ParameterError("band_limited_window: nu must be positive");
  // raised-cosine spectrum: plateau [-nu/8, nu/8], support (-3nu/8, 3nu/8)
  double A = nu / 8, B = 3 * nu / 8;
  auto val = [A, B](double s) -> cplx {
    auto sinc = [](double x) { return x == 0 ? 1.0 : std::sin(M_PI * x) / (M_PI * x); };
    double den = 1.0 - std::pow(2 * (B - A) * s, 2);
    if (std::abs(den) < 1e-8) {
      double e = 1e-5;
      double d1 = 1.0 - std::pow(2 * (B - A) * (s - e), 2);
      double d2 = 1.0 - std::pow(2 * (B - A) * (s + e), 2);
      return 0.5 * ((A + B) * sinc((A + B) * (s - e)) * std::cos(M_PI * (B - A) * (s - e)) / d1 +
                    (A + B) * sinc((A + B) * (s + e)) * std::cos(M_PI * (B - A) * (s + e)) / d2);
    }
    return (A + B) * sinc((A + B) * s) * std::cos(M_PI * (B - A) * s) / den;
  };
  TimeWindowFunction g;
  g.dt = dt;
  int n = grid_points(t_max, dt);
  g.t_max = (n - 1) / 2 * dt;
  g.values.resize(n);
  for (int i = 0; i < n; ++i) g.values[i] = val(g.time_at(i));
  g.exact = val;
  return g;
}

StabilityWitness stability_witness(const ConvolutionElement& b, const Eigenframe& frame,
                                   double epsilon) {
  int d = static_cast<int>(frame.x.size()) - 1;
  if (d < 0) throw UsageError("stability witness needs a nonempty eigenframe");
  double nu = frame.freq[0] / kTwoPi;  // base frequency in cycles
  if (b.dt > 1.0 / (8 * (d + 1) * nu))
    throw ResolutionError("time grid too coarse for the modulation frequencies");
  const SampledSpace& sp = *b.space;
  int n = b.size();

  // b must be scalar (constant fields): the square root is computed spectrally
  std::vector<cplx> beta(n);
  for (int i = 0; i < n; ++i) {
    const auto& v = b.values[i].v;
    for (const auto& x : v)
      if (std::abs(x - v[0]) > 1e-9) throw ParameterError("stability witness needs scalar b");
    beta[i] = v[0];
  }

  // normalize ||b|| = sup of the spectrum to 1, then sqrt on the spectrum
  std::vector<double> bhat(n);
  double bsup = 0;
  for (int k = 0; k < n; ++k) {
    double xi = static_cast<double>(k - n / 2) / (n * b.dt);
    cplx acc = 0;
    for (int i = 0; i < n; ++i) acc += beta[i] * std::polar(1.0, -kTwoPi * b.time_at(i) * xi);
    bhat[k] = std::max(0.0, acc.real() * b.dt);
    bsup = std::max(bsup, std::abs(acc) * b.dt);
  }
  if (bsup <= 0) throw ParameterError("stability witness: b vanishes");
  for (auto& v : bhat) v /= bsup;
  ConvolutionElement b1 = scale(b, 1.0 / bsup);

  double Tg = std::min(frame.T, b.t_max / 6);
  double Tb = b.t_max / 2 - Tg - 2 * b.dt;
  std::vector<cplx> sqb(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (std::abs(b.time_at(i)) > Tb) continue;  // hard truncation (D3)-style
    cplx acc = 0;
    for (int k = 0; k < n; ++k) {
      double xi = static_cast<double>(k - n / 2) / (n * b.dt);
      acc += std::sqrt(bhat[k]) * std::polar(1.0, kTwoPi * b.time_at(i) * xi);
    }
    sqb[i] = acc / (n * b.dt);
  }
  auto sqrt_b = zero_element(sp, b.flow, b.t_max, b.dt);
  for (int i = 0; i < n; ++i)
    if (sqb[i] != 0.0)
      for (auto& v : sqrt_b.values[i].v) v = sqb[i];

  // g with spectrum inside (-nu/2, nu/2), truncated to [-Tg, Tg]
  auto g = band_limited_window(nu, b.t_max, b.dt);
  for (int i = 0; i < g.size(); ++i)
    if (std::abs(g.time_at(i)) > Tg) g.values[i] = 0.0;

  // y = sqrt(b) a (sum_l x~(l) mu_{-freq_l}(g)), a = 1
  ConvolutionElement xg = zero_element(sp, b.flow, b.t_max, b.dt);
  for (int l = 0; l <= d; ++l) {
    auto gl = modulate(g, -frame.freq[l] / kTwoPi);
    for (int i = 0; i < n; ++i) {
      cplx c = std::abs(b.time_at(i)) > Tg ? cplx(0.0) : gl.values[i];
      if (c == 0.0) continue;
      for (std::size_t m = 0; m < sp.size(); ++m)
        xg.values[i].v[m] += c * frame.x[l].v[m];
    }
  }

  auto y = convolve(sqrt_b, xg);
  auto yy = convolve(y, adjoint(y));
  auto y2 = convolve(y, y);
  auto dyy = subtract(yy, b1);

  StabilityWitness out;
  out.cert.name = "stability_witness";
  out.cert.l1_norm_semantics = true;
  out.cert.params["d"] = d;
  out.cert.params["epsilon"] = epsilon;
  out.cert.params["nu"] = nu;
  out.cert.params["Tg"] = Tg;
  out.cert.params["Tb"] = Tb;
  double target = (6.0 * d + 10.0) * epsilon;
  double tol = 5 * b.dt;
  out.cert.add("yy_star_minus_b_l1", dyy.l1_norm(), target, tol);
  out.cert.add("y_sq_l1", y2.l1_norm(), target, tol);
  out.cert.add("y_norm_sq", yy.l1_norm(), 1.0 + target, tol);

  // mutual orthogonality of the modulated windows under convolution
  double orth = 0;
  for (int l = 0; l <= d; ++l)
    for (int k = l + 1; k <= d; ++k) {
      auto gl = modulate(g, -frame.freq[l] / kTwoPi);
      auto gk = modulate(g, -frame.freq[k] / kTwoPi);
      double worst = 0;
      for (int i = 0; i < n; ++i) {  // scalar convolution on the grid
        cplx acc = 0;
        for (int j = 0; j < n; ++j) {
          int jj = i - j + n / 2;
          if (jj < 0 || jj >= n) continue;
          acc += gl.values[j] * gk.values[jj];
        }
        worst += std::abs(acc) * b.dt * b.dt;
      }
      orth = std::max(orth, worst);
    }
  out.cert.add("modulation_orthogonality", orth, epsilon, 1e-9);
  out.y = std::move(y);
  return out;
}

// ---------------------------------------------------------------------------
// serialization

void write_element(const std::string& path_prefix, const ConvolutionElement& f) {
  nlohmann::ordered_json j;
  j["t_max"] = f.t_max;
  j["dt"] = f.dt;
  j["grid_size"] = f.size();
  j["samples"] = f.space ? f.space->size() : 0;
  j["l1_norm"] = f.l1_norm();
  j["sup_norm"] = f.sup_norm();
  j["l1_norm_semantics"] = true;
  std::FILE* jf = std::fopen((path_prefix + ".json").c_str(), "w");
  if (!jf) throw UsageError("cannot open " + path_prefix + ".json");
  std::string text = j.dump(2);
  std::fwrite(text.data(), 1, text.size(), jf);
  std::fclose(jf);

  std::FILE* cf = std::fopen((path_prefix + ".csv").c_str(), "w");
  if (!cf) throw UsageError("cannot open " + path_prefix + ".csv");
  std::fprintf(cf, "t,sample,re,im\n");
  for (int i = 0; i < f.size(); ++i) {
    if (f.values[i].sup_norm() == 0) continue;
    for (std::size_t m = 0; m < f.values[i].v.size(); ++m)
      std::fprintf(cf, "%.17g,%zu,%.17g,%.17g\n", f.time_at(i), m, f.values[i].v[m].real(),
                   f.values[i].v[m].imag());
  }
  std::fclose(cf);
}

}  // namespace flowdim
