#pragma once
// Boxes, long thin covers, tube-dimension certificates, and the partition
// pipeline connecting covers to flow-Lipschitz maps into nerve complexes.

#include <functional>
#include <optional>

#include "flowdim/flow.hpp"
#include "flowdim/simplicial.hpp"

namespace flowdim {

struct Check {
  std::string name;
  double measured = 0;
  double bound = 0;
  double tolerance = 0;
  bool pass = false;
  // optional plot series: (parameter, measured, bound)
  std::vector<std::array<double, 3>> series;
};

struct Certificate {
  std::string name;
  std::vector<Check> checks;
  std::map<std::string, double> params;  // grid provenance
  bool l1_norm_semantics = false;  // residuals are L1 upper bounds, not operator norms

  Check& add(const std::string& check_name, double measured, double bound, double tol);
  bool passed() const;
  std::string to_json() const;
};

// A box: central slice S, length l, exit margin eps. time_coord gives the
// flow-time offset from the slice and must be valid on the margin-extended
// tube; containment and a_+/a_- derive from it.
struct BoxSpec {
  double length = 0;
  double margin = 0;
  std::function<std::optional<double>(const Pt&)> time_coord;
  std::vector<Pt> slice_samples;  // finite parametrization of S
  std::string desc;

  bool contains(const Pt& p) const;
  double a_plus(const Pt& p) const;   // forward exit time, l/2 - t
  double a_minus(const Pt& p) const;  // backward exit time, -l/2 - t
};

Certificate verify_box(const SampledSpace& space, const FlowSpec& flow, const BoxSpec& box,
                       double t_step);

// Same slice, length + 2L, margin - 2L. Requires 0 < L < margin/2.
BoxSpec stretch_box(const BoxSpec& box, double L);

struct TubeMember {
  std::vector<int> samples;  // sampled open set U
  BoxSpec box;               // enclosing verified box
  int color = 0;
  std::string desc;
  // chart-level predicates/evaluators (fast construction-side path)
  std::function<bool(const Pt&)> in_open;              // p in U
  std::function<bool(const Pt&, double)> in_stretched; // p in closure of Phi_[-S,S](U)
  std::function<double(const Pt&)> phi;                // normalized partition weight
  std::function<double(const Pt&)> a_plus_fast;        // valid where phi > 0
};

struct TubeCover {
  double L = 0;
  std::string region = "all";
  int num_colors = 0;
  double phi_flow_lipschitz = 0;  // recorded bound for the tent partition
  std::vector<TubeMember> members;
};

// Long thin cover for suspension/torus families via the return-rotation
// two-tower interval system; colors = (tower, window parity).
TubeCover build_long_thin_cover(const SampledSpace& space, const FlowSpec& flow, double L,
                                const std::string& region = "all");

// Smear a relative partition of unity for Phi_[-lambda,lambda](A) into one for
// A; outputs are flow-Lipschitz with constant <= 1/lambda.
std::vector<ScalarField> smear_partition(const FlowSpec& flow,
                                         const std::vector<ScalarField>& pou, double lambda,
                                         double dt);

// F: Y -> |CZ| built from a cover at scale L = (d+2)/eta: smeared subordinate
// partition composed with map-to-nerve.
struct LipschitzMap {
  NerveMap nerve_map;
  double eta = 0;
  double L = 0;
  const TubeCover* cover = nullptr;
  RealizationPoint at(const Pt& p) const { return nerve_map.at(p); }
};

LipschitzMap cover_to_lipschitz_map(const SampledSpace& space, const FlowSpec& flow,
                                    const TubeCover& cover, double eta, double smear_dt);

// Colored partition phi_sigma = nu_sigma o F, colors by simplex dimension.
struct ColoredPartition {
  struct Item {
    std::function<double(const Pt&)> phi;
    std::vector<double> sampled;  // phi at space samples
    int color = 0;
    int box_member = -1;  // index into the source cover's members
    std::string name;
  };
  std::vector<Item> items;
  int num_colors = 0;
  double flow_lipschitz = 0;  // recorded
};

ColoredPartition map_to_colored_partition(const SampledSpace& space, const LipschitzMap& F);

// (psi - 2 eta'/L)_+ thresholding and renormalization; supports become
// Phi_[-L,L]-separated within each color.
ColoredPartition threshold_renormalize(const SampledSpace& space, const ColoredPartition& part,
                                       double eta_prime, double L);

Certificate tube_dimension_certificate(const SampledSpace& space, const FlowSpec& flow, int d,
                                       const std::vector<double>& L_list,
                                       const std::string& region = "all");

// Tent partition directly subordinate to a cover (normalized squares of the
// member tents); colored and box-supported.
ColoredPartition cover_tent_partition(const SampledSpace& space, const TubeCover& cover);

// CSV export of a cover: member id, color, sample index
void write_cover_csv(const std::string& path, const TubeCover& cover);

}  // namespace flowdim
