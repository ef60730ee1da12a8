#include "flowdim/flow.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "flowdim/kernels.hpp"

namespace flowdim {

namespace {
constexpr double kInvPhi = 1.0 / kGoldenRatio;  // = phi - 1

char fib_type(double x) { return frac(x) < kInvPhi ? 'a' : 'b'; }
double fib_len(char t) { return t == 'a' ? kGoldenRatio : 1.0; }
}  // namespace

FlowSpec FlowSpec::torus(std::vector<double> v) {
  FlowSpec f;
  f.family = Family::TorusLinear;
  f.velocity = std::move(v);
  return f;
}
FlowSpec FlowSpec::suspension(double angle, double roof) {
  FlowSpec f;
  f.family = Family::Suspension;
  f.angle = angle;
  f.roof = roof;
  return f;
}
FlowSpec FlowSpec::fibonacci_hull(double window_radius) {
  FlowSpec f;
  f.family = Family::TilingHull;
  f.window_radius = window_radius;
  return f;
}
FlowSpec FlowSpec::circle(double period) {
  FlowSpec f;
  f.family = Family::PeriodicCircle;
  f.period = period;
  return f;
}

Pt evolve(const FlowSpec& flow, const Pt& y, double t) {
  if (!std::isfinite(t)) throw ParameterError("evolve: non-finite t");
  switch (flow.family) {
    case FlowSpec::Family::TorusLinear: {
      Pt r(y.size());
      for (std::size_t d = 0; d < y.size(); ++d) r[d] = frac(y[d] + t * flow.velocity[d]);
      return r;
    }
    case FlowSpec::Family::PeriodicCircle: {
      double m = flow.period;
      return {frac((y[0] + t) / m) * m};
    }
    case FlowSpec::Family::Suspension: {
      // constant roof: k full crossings, base advances k*angle
      double total = y[1] + t;
      double k = std::floor(total / flow.roof);
      return {frac(y[0] + k * flow.angle), total - k * flow.roof};
    }
    case FlowSpec::Family::TilingHull:
      // flow along the leaf is translation in the leaf coordinate
      return {y[0] + t};
  }
  throw ParameterError("evolve: bad family");
}

Pt evolve(const SampledSpace& space, const FlowSpec& flow, int point_index, double t) {
  Pt r = evolve(flow, space.points.at(point_index), t);
  if (flow.family == FlowSpec::Family::TilingHull && std::abs(r[0]) > flow.window_radius)
    throw WindowExceeded("hull evolution left the window");
  return r;
}

double SampledSpace::metric(const Pt& a, const Pt& b) const {
  switch (flow.family) {
    case FlowSpec::Family::TorusLinear: {
      double s = 0;
      for (std::size_t d = 0; d < a.size(); ++d) {
        double c = circ_norm(a[d] - b[d]);
        s += c * c;
      }
      return std::sqrt(s);
    }
    case FlowSpec::Family::PeriodicCircle:
      return flow.period * circ_norm((a[0] - b[0]) / flow.period);
    case FlowSpec::Family::Suspension: {
      auto direct = [&](const Pt& p, const Pt& q) {
        double cx = circ_norm(p[0] - q[0]);
        return std::hypot(cx, p[1] - q[1]);
      };
      // account for the roof identification (x, roof) ~ (x + angle, 0)
      Pt up{frac(a[0] + flow.angle), a[1] - flow.roof};
      Pt dn{frac(a[0] - flow.angle), a[1] + flow.roof};
      return std::min({direct(a, b), direct(up, b), direct(dn, b)});
    }
    case FlowSpec::Family::TilingHull: {
      // 1/(1+r): r = patch agreement radius around the two leaf positions,
      // allowing a small rigid translation of one patch
      double s1 = a[0], s2 = b[0];
      double last_end = tiles.back().start + fib_len(tiles.back().type);
      double rmax = std::min(std::min(s1 - tiles.front().start, last_end - s1),
                             std::min(s2 - tiles.front().start, last_end - s2));
      if (rmax <= 0) return 1.0;
      int i1 = tile_index(s1), i2 = tile_index(s2);
      double tau = (s1 - tiles[i1].start) - (s2 - tiles[i2].start);  // shift of patch2
      const double eps_trans = 0.05, eps_align = 1e-9;
      if (std::abs(tau) > eps_trans || tiles[i1].type != tiles[i2].type)
        return 1.0;  // r = 0
      auto agree_dir = [&](int dir) {
        int j1 = i1, j2 = i2;
        while (true) {
          j1 += dir;
          j2 += dir;
          if (j1 < 0 || j2 < 0 || j1 >= static_cast<int>(tiles.size()) ||
              j2 >= static_cast<int>(tiles.size()))
            return rmax;
          double b1 = dir > 0 ? tiles[j1].start : tiles[j1 + 1].start;
          double b2 = dir > 0 ? tiles[j2].start : tiles[j2 + 1].start;
          if (tiles[j1].type != tiles[j2].type ||
              std::abs((b1 - s1) - (b2 - s2 + tau)) > eps_align)
            return std::abs(b1 - s1);
        }
      };
      double r = std::min({agree_dir(+1), agree_dir(-1), rmax});
      return 1.0 / (1.0 + r);
    }
  }
  throw ParameterError("metric: bad family");
}

const std::vector<int>& SampledSpace::region(const std::string& name) const {
  auto it = regions.find(name);
  if (it == regions.end()) throw UsageError("unknown region: " + name);
  return it->second;
}

int SampledSpace::tile_index(double s) const {
  // tiles sorted by start; find last tile with start <= s
  auto it = std::upper_bound(tiles.begin(), tiles.end(), s,
                             [](double v, const HullTile& t) { return v < t.start; });
  if (it == tiles.begin()) throw WindowExceeded("position before tiled window");
  --it;
  if (s >= it->start + fib_len(it->type) + 1e-12)
    throw WindowExceeded("position beyond tiled window");
  return static_cast<int>(it - tiles.begin());
}

const HullTile& SampledSpace::tile_at(double s) const { return tiles[tile_index(s)]; }

ScalarField::ScalarField(const SampledSpace& s, cplx fill) : space(&s), v(s.size(), fill) {}

ScalarField::ScalarField(const SampledSpace& s, std::function<cplx(const Pt&)> f)
    : space(&s), v(s.size()), exact(std::move(f)) {
  parallel_for(v.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) v[i] = exact(s.points[i]);
  });
}

cplx ScalarField::eval(const Pt& p) const {
  if (exact) return exact(p);
  return interpolate(*space, v, p);
}

double ScalarField::sup_norm() const { return kernels::sup_abs(v.data(), v.size()); }

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  kernels::axpy(v.data(), o.v.data(), 1.0, v.size());
  if (exact && o.exact) {
    auto e1 = exact, e2 = o.exact;
    exact = [e1, e2](const Pt& p) { return e1(p) + e2(p); };
  } else {
    exact = nullptr;
  }
  return *this;
}

ScalarField& ScalarField::operator*=(const ScalarField& o) {
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= o.v[i];
  if (exact && o.exact) {
    auto e1 = exact, e2 = o.exact;
    exact = [e1, e2](const Pt& p) { return e1(p) * e2(p); };
  } else {
    exact = nullptr;
  }
  return *this;
}

ScalarField ScalarField::conj() const {
  ScalarField r(*space);
  for (std::size_t i = 0; i < v.size(); ++i) r.v[i] = std::conj(v[i]);
  if (exact) {
    auto e = exact;
    r.exact = [e](const Pt& p) { return std::conj(e(p)); };
  }
  return r;
}

cplx interpolate(const SampledSpace& space, const std::vector<cplx>& values, const Pt& p) {
  const auto& shape = space.shape;
  std::size_t ndim = shape.size();
  // per-axis cell index + fraction
  int idx0[8];
  double fr[8];
  bool wrap[8];
  assert(ndim <= 8);
  for (std::size_t d = 0; d < ndim; ++d) {
    int n = shape[d];
    double step = space.periodic[d] ? space.axis_len[d] / n : space.axis_len[d] / (n - 1);
    double pos = (p[d] - space.axis_min[d]) / step;
    if (space.periodic[d]) {
      pos -= std::floor(pos / n) * n;
      int i0 = static_cast<int>(std::floor(pos));
      fr[d] = pos - i0;
      idx0[d] = i0 % n;
      wrap[d] = true;
    } else {
      if (pos < -1e-9 || pos > n - 1 + 1e-9)
        throw ExtrapolationError("interpolation outside sampled region");
      pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
      int i0 = std::min(static_cast<int>(std::floor(pos)), n - 2);
      if (n == 1) i0 = 0;
      fr[d] = pos - i0;
      idx0[d] = i0;
      wrap[d] = false;
    }
  }
  // strides, row-major
  std::size_t stride[8];
  std::size_t acc = 1;
  for (int d = static_cast<int>(ndim) - 1; d >= 0; --d) {
    stride[d] = acc;
    acc *= shape[d];
  }
  cplx out = 0.0;
  int corners = 1 << ndim;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    std::size_t flat = 0;
    for (std::size_t d = 0; d < ndim; ++d) {
      int bit = (c >> d) & 1;
      w *= bit ? fr[d] : 1.0 - fr[d];
      int i = idx0[d] + bit;
      if (wrap[d]) i %= shape[d];
      else i = std::min(i, shape[d] - 1);
      flat += static_cast<std::size_t>(i) * stride[d];
    }
    if (w != 0.0) out += w * values[flat];
  }
  return out;
}

ScalarField pullback(const FlowSpec& flow, const ScalarField& field, double t) {
  const SampledSpace& s = *field.space;
  ScalarField r(s);
  parallel_for(s.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) r.v[i] = field.eval(evolve(flow, s.points[i], -t));
  });
  if (field.exact) {
    auto e = field.exact;
    FlowSpec fl = flow;
    r.exact = [e, fl, t](const Pt& p) { return e(evolve(fl, p, -t)); };
  }
  return r;
}

Window Window::uniform(double lo, double hi, double dt) {
  if (!(hi > lo) || !(dt > 0)) throw InvalidWindow("need hi > lo and dt > 0");
  Window w;
  w.lo = lo;
  w.hi = hi;
  w.dt = dt;
  return w;
}

namespace {
// trapezoid nodes and combined weights over [lo, hi]
void quad_nodes(const Window& w, std::vector<double>& ts, std::vector<double>& wt) {
  int n = std::max(1, static_cast<int>(std::ceil((w.hi - w.lo) / w.dt)));
  double h = (w.hi - w.lo) / n;
  double unif = 1.0 / (w.hi - w.lo);
  ts.resize(n + 1);
  wt.resize(n + 1);
  for (int j = 0; j <= n; ++j) {
    ts[j] = w.lo + j * h;
    double f = w.weight ? w.weight(ts[j]) : unif;
    wt[j] = f * h * ((j == 0 || j == n) ? 0.5 : 1.0);
  }
}
}  // namespace

ScalarField flow_average(const FlowSpec& flow, const ScalarField& field, const Window& w) {
  if (!(w.hi > w.lo)) throw InvalidWindow("empty window");
  std::vector<double> ts, wt;
  quad_nodes(w, ts, wt);
  const SampledSpace& s = *field.space;
  ScalarField r(s);
  parallel_for(s.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      cplx acc = 0.0;
      for (std::size_t j = 0; j < ts.size(); ++j)
        acc += wt[j] * field.eval(evolve(flow, s.points[i], -ts[j]));
      r.v[i] = acc;
    }
  });
  if (field.exact) {
    auto e = field.exact;
    FlowSpec fl = flow;
    r.exact = [e, fl, ts, wt](const Pt& p) {
      cplx acc = 0.0;
      for (std::size_t j = 0; j < ts.size(); ++j) acc += wt[j] * e(evolve(fl, p, -ts[j]));
      return acc;
    };
  }
  return r;
}

double flow_lipschitz_constant(const FlowSpec& flow, const ScalarField& field,
                               const std::vector<double>& t_grid) {
  const SampledSpace& s = *field.space;
  std::vector<double> part(thread_count(), 0.0);
  std::atomic<int> slot{0};
  parallel_for(s.size(), [&](std::size_t lo, std::size_t hi) {
    int me = slot.fetch_add(1);
    double m = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      for (double t : t_grid) {
        if (t == 0.0) continue;
        double d = std::abs(field.eval(evolve(flow, s.points[i], t)) - field.v[i]) / std::abs(t);
        if (d > m) m = d;
      }
    }
    part[me] = std::max(part[me], m);
  });
  return *std::max_element(part.begin(), part.end());
}

cplx invariant_integral(const SampledSpace& space, const ScalarField& field) {
  return kernels::weighted_sum(field.v.data(), space.weights.data(), field.v.size());
}

std::vector<double> min_separation_time(const SampledSpace& space, const FlowSpec& flow,
                                        double horizon, double gap, double t_step) {
  if (!(horizon > 0)) throw ParameterError("min_separation_time: horizon must be positive");
  auto scan = [&](const Pt& y) {
    for (double t = t_step; t <= horizon + 1e-12; t += t_step) {
      if (space.metric(evolve(flow, y, t), y) < gap) return std::max(0.0, t - t_step);
    }
    return horizon;
  };
  std::vector<double> out(space.size());
  bool translation_invariant = flow.family == FlowSpec::Family::TorusLinear ||
                               flow.family == FlowSpec::Family::PeriodicCircle;
  if (translation_invariant && !space.points.empty()) {
    double b = scan(space.points[0]);
    std::fill(out.begin(), out.end(), b);
    return out;
  }
  parallel_for(space.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) out[i] = scan(space.points[i]);
  });
  return out;
}

namespace {
std::vector<int> all_indices(std::size_t n) {
  std::vector<int> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}
}  // namespace

SampledSpace make_torus_space(const FlowSpec& flow, int n_per_axis) {
  std::size_t ndim = flow.velocity.size();
  SampledSpace s;
  s.flow = flow;
  s.shape.assign(ndim, n_per_axis);
  s.axis_min.assign(ndim, 0.0);
  s.axis_len.assign(ndim, 1.0);
  s.periodic.assign(ndim, true);
  std::size_t total = 1;
  for (std::size_t d = 0; d < ndim; ++d) total *= n_per_axis;
  s.points.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    Pt p(ndim);
    std::size_t rem = i;
    for (int d = static_cast<int>(ndim) - 1; d >= 0; --d) {
      p[d] = static_cast<double>(rem % n_per_axis) / n_per_axis;
      rem /= n_per_axis;
    }
    s.points[i] = std::move(p);
  }
  s.weights.assign(total, 1.0 / total);  // Haar, exact
  s.measure_defect = 0.0;
  s.regions["all"] = all_indices(total);
  return s;
}

SampledSpace make_circle_space(const FlowSpec& flow, int n) {
  SampledSpace s;
  s.flow = flow;
  s.shape = {n};
  s.axis_min = {0.0};
  s.axis_len = {flow.period};
  s.periodic = {true};
  s.points.resize(n);
  for (int i = 0; i < n; ++i) s.points[i] = {flow.period * i / n};
  s.weights.assign(n, 1.0 / n);
  s.measure_defect = 0.0;
  s.regions["all"] = all_indices(n);
  return s;
}

SampledSpace make_suspension_space(const FlowSpec& flow, int nx, int nu) {
  SampledSpace s;
  s.flow = flow;
  s.shape = {nx, nu};
  s.axis_min = {0.0, 0.0};
  s.axis_len = {1.0, flow.roof};
  s.periodic = {true, false};  // roof identification handled by evolve, not interpolation
  s.points.resize(static_cast<std::size_t>(nx) * nu);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nu; ++j)
      s.points[static_cast<std::size_t>(i) * nu + j] = {static_cast<double>(i) / nx,
                                                        flow.roof * j / (nu - 1)};
  s.weights.assign(s.points.size(), 1.0 / s.points.size());
  s.measure_defect = 1.0 / nu;  // roof-edge double counting, first order
  s.regions["all"] = all_indices(s.points.size());
  return s;
}

SampledSpace make_hull_space(const FlowSpec& flow, int n, double span) {
  if (span >= flow.window_radius)
    throw ParameterError("hull sample span must stay inside the window radius");
  SampledSpace s;
  s.flow = flow;
  s.shape = {n};
  s.axis_min = {-span};
  s.axis_len = {2 * span};
  s.periodic = {false};
  s.hull_phase = frac(1.0 / M_PI);  // generic leaf: never hits a coding endpoint
  // walk tiles over [-R, R]
  double reach = flow.window_radius + 2 * kGoldenRatio;
  {
    double x = s.hull_phase, pos = 0.0;
    while (pos < reach) {
      char t = fib_type(x);
      s.tiles.push_back({pos, t});
      pos += fib_len(t);
      x = frac(x + kInvPhi);
    }
    x = s.hull_phase;
    pos = 0.0;
    std::vector<HullTile> back;
    while (pos > -reach) {
      x = frac(x - kInvPhi);
      char t = fib_type(x);
      pos -= fib_len(t);
      back.push_back({pos, t});
    }
    s.tiles.insert(s.tiles.begin(), back.rbegin(), back.rend());
  }
  s.points.resize(n);
  for (int i = 0; i < n; ++i) s.points[i] = {-span + 2 * span * i / (n - 1)};
  s.weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) s.weights[i] = (i == 0 || i == n - 1) ? 0.5 : 1.0;
  double tot = std::accumulate(s.weights.begin(), s.weights.end(), 0.0);
  for (auto& w : s.weights) w /= tot;
  // leaf-segment Lebesgue: invariance defect per unit flow time
  s.measure_defect = 1.0 / span;
  s.regions["all"] = all_indices(n);
  std::vector<int> core;
  for (int i = 0; i < n; ++i)
    if (std::abs(s.points[i][0]) <= 0.8 * span) core.push_back(i);
  s.regions["core"] = core;
  return s;
}

void write_field_csv(const std::string& path, const ScalarField& f) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw UsageError("cannot open " + path);
  std::size_t nd = f.space->points.empty() ? 0 : f.space->points[0].size();
  std::fprintf(fp, "index");
  for (std::size_t d = 0; d < nd; ++d) std::fprintf(fp, ",x%zu", d);
  std::fprintf(fp, ",re,im\n");
  for (std::size_t i = 0; i < f.v.size(); ++i) {
    std::fprintf(fp, "%zu", i);
    for (std::size_t d = 0; d < nd; ++d) std::fprintf(fp, ",%.17g", f.space->points[i][d]);
    std::fprintf(fp, ",%.17g,%.17g\n", f.v[i].real(), f.v[i].imag());
  }
  std::fclose(fp);
}

}  // namespace flowdim
