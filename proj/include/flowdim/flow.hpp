#pragma once
// Spaces, exactly-evolvable flow families, sampled scalar fields, invariant
// measures, and flow averaging. Everything downstream consumes this module.

#include <complex>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "flowdim/errors.hpp"
#include "flowdim/util.hpp"

namespace flowdim {

using cplx = std::complex<double>;
using Pt = std::vector<double>;  // chart coordinates

struct FlowSpec {
  enum class Family { TorusLinear, Suspension, TilingHull, PeriodicCircle };
  Family family = Family::TorusLinear;

  std::vector<double> velocity;  // TorusLinear
  double angle = 0.0;            // Suspension: base rotation
  double roof = 1.0;             // Suspension: constant roof height
  double window_radius = 0.0;    // TilingHull: evolution window
  double period = 1.0;           // PeriodicCircle: M

  static FlowSpec torus(std::vector<double> v);
  static FlowSpec suspension(double angle, double roof);
  static FlowSpec fibonacci_hull(double window_radius);
  static FlowSpec circle(double period);
};

// One tile of the reference Fibonacci tiling: [start, start+len), type a or b.
struct HullTile {
  double start;
  char type;  // 'a' (length phi) or 'b' (length 1)
};

struct SampledSpace {
  FlowSpec flow;  // chart/metric/interpolation need the family
  std::vector<Pt> points;
  std::vector<double> weights;  // quadrature weights, sum 1 for compact scenarios
  std::map<std::string, std::vector<int>> regions;
  double measure_defect = 0.0;  // flow-invariance defect bound of the measure

  // regular-grid structure (used by multilinear interpolation)
  std::vector<int> shape;
  std::vector<double> axis_min, axis_len;
  std::vector<bool> periodic;

  // TilingHull only: precomputed tile boundaries of the reference leaf
  std::vector<HullTile> tiles;
  double hull_phase = 0.0;  // base-circle parameter of leaf position 0

  double metric(const Pt& a, const Pt& b) const;
  std::size_t size() const { return points.size(); }
  const std::vector<int>& region(const std::string& name) const;

  // tile containing leaf position s (TilingHull)
  const HullTile& tile_at(double s) const;
  int tile_index(double s) const;
};

// Exact closed-form evaluation of Phi_t. No ODE integration anywhere.
Pt evolve(const FlowSpec& flow, const Pt& y, double t);
// Window check variant for the hull (throws WindowExceeded).
Pt evolve(const SampledSpace& space, const FlowSpec& flow, int point_index, double t);

struct ScalarField {
  const SampledSpace* space = nullptr;
  std::vector<cplx> v;
  // Optional exact chart-point evaluator. Present for analytically-defined
  // fields (witness fields, tents, trig polynomials); absent for grid-born
  // fields, which interpolate.
  std::function<cplx(const Pt&)> exact;

  ScalarField() = default;
  ScalarField(const SampledSpace& s, cplx fill = 0.0);
  ScalarField(const SampledSpace& s, std::function<cplx(const Pt&)> f);

  cplx eval(const Pt& p) const;  // exact if available, else interpolation
  double sup_norm() const;
  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator*=(const ScalarField& o);
  ScalarField conj() const;
};

// Multilinear interpolation of sampled values at an arbitrary chart point.
cplx interpolate(const SampledSpace& space, const std::vector<cplx>& values, const Pt& p);

// (alpha_t f)(y) = f(Phi_{-t}(y))
ScalarField pullback(const FlowSpec& flow, const ScalarField& field, double t);

struct Window {
  double lo, hi;  // support [lo, hi]
  double dt;      // trapezoid step
  std::function<double(double)> weight;  // nullptr = uniform 1/(hi-lo)
  static Window uniform(double lo, double hi, double dt);
};

// int w(t) f(Phi_{-t}(y)) dt by trapezoid quadrature.
ScalarField flow_average(const FlowSpec& flow, const ScalarField& field, const Window& w);

// Empirical sup over samples and t of |f(Phi_t(y)) - f(y)| / |t|.
// A lower bound on the true flow-Lipschitz constant; reported as such.
double flow_lipschitz_constant(const FlowSpec& flow, const ScalarField& field,
                               const std::vector<double>& t_grid);

cplx invariant_integral(const SampledSpace& space, const ScalarField& field);

// Per point: largest T <= horizon with Phi_(0,T] staying >= gap away from y.
std::vector<double> min_separation_time(const SampledSpace& space, const FlowSpec& flow,
                                        double horizon, double gap, double t_step);

// Space factories. All produce probability quadrature weights.
SampledSpace make_torus_space(const FlowSpec& flow, int n_per_axis);
SampledSpace make_circle_space(const FlowSpec& flow, int n);
SampledSpace make_suspension_space(const FlowSpec& flow, int nx, int nu);
// Samples one leaf of the hull over [-span, span]; span + slack <= window_radius.
SampledSpace make_hull_space(const FlowSpec& flow, int n, double span);

// CSV export: index, coordinates, re, im
void write_field_csv(const std::string& path, const ScalarField& f);

constexpr double kGoldenRatio = 1.6180339887498948482;

}  // namespace flowdim
