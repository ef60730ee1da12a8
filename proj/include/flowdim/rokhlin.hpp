#pragma once
// Finite-tolerance Rokhlin witnesses: construction from tube covers,
// certification, eigenframes, discrete-time towers, and box extraction.

#include "flowdim/tube.hpp"

namespace flowdim {

// Contractions x^(0..d) approximately equivariant at frequency p = 2pi/M,
// with the four finitary defects measured by certify_witness.
struct RokhlinWitness {
  double p = 0;            // rad/s
  double M = 0;            // 2*pi/p
  double T = 0;            // horizon (s)
  double target_delta = 0;
  std::vector<ScalarField> x;         // contractions, sup norm <= 1
  std::vector<ScalarField> test_set;  // localization functions F
  // measured defects (filled by certify_witness)
  double delta_a = -1, delta_b = -1, delta_c = -1, delta_d = -1;

  int d() const { return static_cast<int>(x.size()) - 1; }
  double max_defect() const;
};

// x^(l) = sum over color-l members of phi_i^{1/2} * exp(-(2 pi i / M) a_{B_i,+}).
// Requires every member to carry phi and a_+ evaluators from a verified box.
RokhlinWitness witness_from_cover(const SampledSpace& space, const TubeCover& cover, double M,
                                  double T, double target_delta);

// Measures the four condition residuals over samples, t_grid, and the test
// set; records them in the witness and returns a certificate against
// target_delta (conditions (c),(d) against 0).
Certificate certify_witness(const SampledSpace& space, const FlowSpec& flow,
                            RokhlinWitness& witness, const std::vector<double>& t_grid);

// Order-zero functional calculus: y -> |x(y)|^2 f(M arg(x(y)) / 2pi), gated by
// |x(y)| > theta_0 = 1e-6; f is a function on R/MZ.
ScalarField order_zero_apply(const SampledSpace& space, const ScalarField& x,
                             const std::function<cplx(double)>& f, double M);

struct Eigenframe {
  double p = 0;
  double T = 0;
  std::vector<ScalarField> x;    // x~^(l), equivariant at frequency (l+1)p
  std::vector<double> freq;      // (l+1)p
  double delta_eq = -1;          // max over l of frequency-(l+1)p residual
  double delta_comp = -1;        // completeness residual
};

// x~^(l) = order_zero_apply(x^(l), u -> exp(2 pi i (l+1) u / M)); measures the
// two eigenframe residuals over the witness test set.
Eigenframe eigenframe_from_witness(const SampledSpace& space, const FlowSpec& flow,
                                   const RokhlinWitness& witness);

// Two interleaved discrete towers for the time-t map, n prime: tower functions
// b_j^(i) are PL hats at nodes j p'/n + i/(2n) on R/MZ (p'/n the best rational
// approximation of (t/M) mod 1 with denominator n).
struct DiscreteTowers {
  double t = 0;
  int n = 0;
  long long p_num = 0;  // numerator p' of the rational rotation p'/n
  // fields[i][j][l] = order_zero_apply(x^(l), b_j^(i))
  std::vector<std::vector<std::vector<ScalarField>>> fields;
  Certificate cert;  // the four bullet residuals vs 2*epsilon
};

DiscreteTowers discrete_towers(const SampledSpace& space, const FlowSpec& flow,
                               const RokhlinWitness& witness, double t, int n, double epsilon);

// Box extraction at scale L: members B^(l,sigma), l <= d, sigma in {+,-},
// built from the phase average xi^(l,sigma) at epsilon = 1/96. The witness
// must be certified at M = 8L, T = 8L with defects inside the delta budget
// (the neighborhood condition on the annular sections D_j).
TubeCover boxes_from_witness(const SampledSpace& space, const FlowSpec& flow,
                             const RokhlinWitness& witness, double L,
                             const std::string& region = "all");

// The largest admissible defect for box extraction: min of 1/(d+2) and the
// geometric slack making N_delta(D_j) fit inside the next annular section.
double witness_delta_budget(int d, double epsilon = 1.0 / 96.0);

// Serialization: JSON header (p, M, T, defects) + CSV of sampled field values.
void write_witness(const std::string& path_prefix, const RokhlinWitness& witness);

}  // namespace flowdim
