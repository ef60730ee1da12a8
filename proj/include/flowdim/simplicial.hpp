#pragma once
// Abstract simplicial complexes with l1 geometric realization, the canonical
// cover/partition of realization space, nerves of covers, and the map-to-nerve.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "flowdim/flow.hpp"

namespace flowdim {

using Simplex = std::vector<int>;  // sorted vertex ids

struct SimplicialComplex {
  std::vector<int> vertices;
  std::set<Simplex> simplices;  // subset-closed, includes all singletons

  int dimension() const;
  bool has(const Simplex& s) const { return simplices.count(s) > 0; }
  static SimplicialComplex from_maximal(const std::vector<Simplex>& maximal);
  std::vector<Simplex> maximal() const;
  std::string to_json() const;
  static SimplicialComplex parse_json(const std::string& text);
};

// Cone CZ: base simplices sigma plus sigma+{cone_vertex} for every sigma.
SimplicialComplex cone(const SimplicialComplex& base, int cone_vertex);

struct RealizationPoint {
  std::map<int, double> coords;  // sparse, entries in (0,1], sum 1

  // numeric hygiene: drop coords < 1e-15, renormalize
  void normalize();
  double at(int v) const {
    auto it = coords.find(v);
    return it == coords.end() ? 0.0 : it->second;
  }
  Simplex support() const;
};

double l1_distance(const RealizationPoint& p, const RealizationPoint& q);

// Nerve of a finite cover given as sample-index sets. Vertex i per nonempty
// set; simplices = subcollections with nonempty common intersection.
SimplicialComplex nerve(const std::vector<std::vector<int>>& cover);

// z in V_sigma: min over v in sigma of z_v exceeds max over v' not in sigma.
bool canonical_member(const SimplicialComplex& Z, const Simplex& sigma,
                      const RealizationPoint& z);

// Exact l1 distance from z to the complement of V_sigma within |Z|.
double vsigma_distance(const SimplicialComplex& Z, const Simplex& sigma,
                       const RealizationPoint& z);

// nu_sigma(z) = d(z, |Z| \ V_sigma) / sum over sigma'. Asserts the
// denominator is positive (guaranteed by the Lebesgue-number property).
double canonical_partition(const SimplicialComplex& Z, const Simplex& sigma,
                           const RealizationPoint& z);
std::map<Simplex, double> canonical_partition_all(const SimplicialComplex& Z,
                                                  const RealizationPoint& z);

// Returns sigma = the l0 greatest coordinates at the first sorted-coordinate
// gap >= 2/((d+1)(d+2)); the ball of radius 1/((d+1)(d+2)) around z lies in
// V_sigma.
Simplex lebesgue_radius_check(const SimplicialComplex& Z, const RealizationPoint& z);

// Map-to-nerve for a relative partition of unity on K subordinate to cover.
// The complement coordinate 1 - sum(pou) is appended as an extra vertex.
struct NerveMap {
  SimplicialComplex complex;  // nerve of the augmented cover
  int complement_vertex;      // = cover.size()
  std::vector<ScalarField> pou;

  RealizationPoint at(const Pt& p) const;       // uses pou evaluators
  RealizationPoint at_sample(std::size_t i) const;
};

NerveMap map_to_nerve(const std::vector<ScalarField>& pou,
                      const std::vector<std::vector<int>>& cover);

}  // namespace flowdim
