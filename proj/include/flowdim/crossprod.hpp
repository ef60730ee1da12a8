#pragma once
// Desk-scale twisted convolution algebra for C0(Y) x_alpha R: products,
// adjoints, trace, explicit projections, and the stability witness.

#include "flowdim/rokhlin.hpp"

namespace flowdim {

// f in C_c(R, A) sampled on the uniform grid t_i = -t_max + i*dt. The L1 norm
// dominates the (unrepresented) crossed-product norm; every certificate built
// from these elements carries the l1_norm_semantics flag.
struct ConvolutionElement {
  const SampledSpace* space = nullptr;
  FlowSpec flow;
  double t_max = 0;
  double dt = 0;
  std::vector<ScalarField> values;

  int size() const { return static_cast<int>(values.size()); }
  double time_at(int i) const { return -t_max + i * dt; }
  int index_of(double t) const;  // -1 when t is off the grid
  double l1_norm() const;        // sum_i sup|f(t_i)| * dt
  double sup_norm() const;
  // grid indices of the first/last nonzero field; {size, -1} when zero
  std::pair<int, int> support() const;
};

ConvolutionElement zero_element(const SampledSpace& space, const FlowSpec& flow, double t_max,
                                double dt);
// f(t_i) = profile(t_i) * field (a simple tensor)
ConvolutionElement tensor_element(const SampledSpace& space, const FlowSpec& flow, double t_max,
                                  double dt, const std::function<cplx(double)>& profile,
                                  const ScalarField& field);

ConvolutionElement add(const ConvolutionElement& f, const ConvolutionElement& g);
ConvolutionElement subtract(const ConvolutionElement& f, const ConvolutionElement& g);
ConvolutionElement scale(const ConvolutionElement& f, cplx c);

// (f*g)(t) = int f(s) alpha_s(g(t-s)) ds, trapezoid over the grid.
ConvolutionElement convolve(const ConvolutionElement& f, const ConvolutionElement& g);

// f~(t) = alpha_t(f(-t)*)
ConvolutionElement adjoint(const ConvolutionElement& f);

// zeta(f) = tau(f(0)) with tau the invariant integral
cplx trace(const ConvolutionElement& f);

// sup_k |f_hat(xi_k)| of a scalar element (constant fields); the C* norm of a
// positive scalar element
double spectral_sup(const ConvolutionElement& f);

struct ProjectionResult {
  ConvolutionElement p;
  Certificate cert;
};

// Projection from a transversal X = {x2 = 0} of a linear torus flow: bump f
// supported in Phi_(-r,r)(X) with f|_X = 1, g = (f / int_{-2r}^{2r} f o Phi)^{1/2},
// p(t) = g * alpha_t(g) for |t| <= 2r.
ProjectionResult transversal_projection(const SampledSpace& space, const FlowSpec& flow,
                                        const std::string& region, double r, double dt);

// Projection from the point set Lambda = left endpoints of the a-tiles of the
// hull's reference leaf: g = sum_{y in Lambda} f(. - y), p(t) = g~ * alpha_t(g).
ProjectionResult tiling_projection(const SampledSpace& space, const FlowSpec& flow, double r,
                                   double dt);

// Scalar time-window functions (g, g~ of the stability construction).
struct TimeWindowFunction {
  double t_max = 0;
  double dt = 0;
  std::vector<cplx> values;
  std::function<cplx(double)> exact;

  int size() const { return static_cast<int>(values.size()); }
  double time_at(int i) const { return -t_max + i * dt; }
  double l1_norm() const;
};

// mu_{t0}(h)(s) = exp(2 pi i t0 s) h(s)
TimeWindowFunction modulate(const TimeWindowFunction& h, double t0);

// Kernel with trapezoidal spectrum: plateau 1 on [-nu/4, nu/4], support inside
// (-nu/2, nu/2); closed-form time profile, C*-norm 1.
TimeWindowFunction band_limited_window(double nu, double t_max, double dt);

struct StabilityWitness {
  ConvolutionElement y;
  Certificate cert;
};

// y = sqrt(b) a (sum_l x~(l) mu(g)) for a positive scalar b with ||b|| = 1 and
// a certified eigenframe; residuals ||yy* - b||, ||y^2||, ||yy*|| in L1.
StabilityWitness stability_witness(const ConvolutionElement& b, const Eigenframe& frame,
                                   double epsilon);

// CSV (t, sample, re, im) + JSON header (grids, norms, semantics flag)
void write_element(const std::string& path_prefix, const ConvolutionElement& f);

}  // namespace flowdim
