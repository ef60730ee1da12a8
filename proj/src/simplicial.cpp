#include "flowdim/simplicial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace flowdim {

int SimplicialComplex::dimension() const {
  int d = -1;
  for (const auto& s : simplices) d = std::max(d, static_cast<int>(s.size()) - 1);
  return d;
}

SimplicialComplex SimplicialComplex::from_maximal(const std::vector<Simplex>& maximal) {
  SimplicialComplex z;
  std::set<int> verts;
  for (const auto& m : maximal) {
    Simplex s = m;
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    verts.insert(s.begin(), s.end());
    // all nonempty subsets
    int n = static_cast<int>(s.size());
    for (int mask = 1; mask < (1 << n); ++mask) {
      Simplex sub;
      for (int b = 0; b < n; ++b)
        if (mask & (1 << b)) sub.push_back(s[b]);
      z.simplices.insert(sub);
    }
  }
  z.vertices.assign(verts.begin(), verts.end());
  return z;
}

std::vector<Simplex> SimplicialComplex::maximal() const {
  std::vector<Simplex> out;
  for (const auto& s : simplices) {
    bool is_max = true;
    for (const auto& t : simplices) {
      if (t.size() > s.size() && std::includes(t.begin(), t.end(), s.begin(), s.end())) {
        is_max = false;
        break;
      }
    }
    if (is_max) out.push_back(s);
  }
  return out;
}

std::string SimplicialComplex::to_json() const {
  nlohmann::ordered_json j;
  j["vertices"] = vertices;
  j["maximal_simplices"] = maximal();
  return j.dump();
}

SimplicialComplex SimplicialComplex::parse_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  std::vector<Simplex> maximal = j.at("maximal_simplices").get<std::vector<Simplex>>();
  SimplicialComplex z = from_maximal(maximal);
  // isolated vertices may not appear in any maximal simplex of size > 1
  for (int v : j.at("vertices").get<std::vector<int>>()) {
    if (!z.has({v})) {
      z.simplices.insert({v});
      z.vertices.push_back(v);
    }
  }
  std::sort(z.vertices.begin(), z.vertices.end());
  return z;
}

SimplicialComplex cone(const SimplicialComplex& base, int cone_vertex) {
  SimplicialComplex c = base;
  c.simplices.insert({cone_vertex});
  for (const auto& s : base.simplices) {
    Simplex t = s;
    t.push_back(cone_vertex);
    std::sort(t.begin(), t.end());
    c.simplices.insert(t);
  }
  c.vertices.push_back(cone_vertex);
  std::sort(c.vertices.begin(), c.vertices.end());
  return c;
}

void RealizationPoint::normalize() {
  double sum = 0;
  for (auto it = coords.begin(); it != coords.end();) {
    if (it->second < 1e-15)
      it = coords.erase(it);
    else
      sum += (it++)->second;
  }
  if (sum > 0)
    for (auto& [v, x] : coords) x /= sum;
}

Simplex RealizationPoint::support() const {
  Simplex s;
  for (const auto& [v, x] : coords)
    if (x > 0) s.push_back(v);
  return s;
}

double l1_distance(const RealizationPoint& p, const RealizationPoint& q) {
  double d = 0;
  for (const auto& [v, x] : p.coords) d += std::abs(x - q.at(v));
  for (const auto& [v, x] : q.coords)
    if (!p.coords.count(v)) d += x;
  return d;
}

SimplicialComplex nerve(const std::vector<std::vector<int>>& cover) {
  int n = static_cast<int>(cover.size());
  std::vector<std::vector<int>> sets(n);
  for (int i = 0; i < n; ++i) {
    sets[i] = cover[i];
    std::sort(sets[i].begin(), sets[i].end());
  }
  SimplicialComplex z;
  // grow simplices by largest-index extension; intersections shrink monotonically
  struct Node {
    Simplex s;
    std::vector<int> inter;
  };
  std::vector<Node> frontier;
  for (int i = 0; i < n; ++i) {
    if (sets[i].empty()) continue;
    z.vertices.push_back(i);
    z.simplices.insert({i});
    frontier.push_back({{i}, sets[i]});
  }
  while (!frontier.empty()) {
    std::vector<Node> next;
    for (const auto& node : frontier) {
      for (int j = node.s.back() + 1; j < n; ++j) {
        if (sets[j].empty()) continue;
        std::vector<int> inter;
        std::set_intersection(node.inter.begin(), node.inter.end(), sets[j].begin(),
                              sets[j].end(), std::back_inserter(inter));
        if (inter.empty()) continue;
        Simplex s = node.s;
        s.push_back(j);
        z.simplices.insert(s);
        next.push_back({std::move(s), std::move(inter)});
      }
    }
    frontier = std::move(next);
  }
  return z;
}

bool canonical_member(const SimplicialComplex& Z, const Simplex& sigma,
                      const RealizationPoint& z) {
  double lo = std::numeric_limits<double>::infinity();
  for (int v : sigma) lo = std::min(lo, z.at(v));
  double hi = 0.0;  // max over vertices outside sigma (coords default to 0)
  for (int v : Z.vertices)
    if (!std::binary_search(sigma.begin(), sigma.end(), v)) hi = std::max(hi, z.at(v));
  return lo > hi;
}

double vsigma_distance(const SimplicialComplex& Z, const Simplex& sigma,
                       const RealizationPoint& z) {
  // Exact closed form over the boundary constraints z_v = z_{v'} (transfer of
  // mass (z_v - z_{v'})/2 from v to v', available when supp(z)+{v'} is a
  // simplex) and the faces z_v = 0 (cost 2 z_v).
  Simplex supp = z.support();
  double best = std::numeric_limits<double>::infinity();
  for (int v : sigma) {
    double zv = z.at(v);
    best = std::min(best, 2.0 * zv);
    for (int w : Z.vertices) {
      if (std::binary_search(sigma.begin(), sigma.end(), w)) continue;
      Simplex ext = supp;
      if (!std::binary_search(ext.begin(), ext.end(), w)) {
        ext.push_back(w);
        std::sort(ext.begin(), ext.end());
      }
      if (Z.has(ext)) best = std::min(best, zv - z.at(w));
    }
  }
  return std::max(0.0, best);
}

std::map<Simplex, double> canonical_partition_all(const SimplicialComplex& Z,
                                                  const RealizationPoint& z) {
  std::map<Simplex, double> raw;
  double total = 0;
  for (const auto& s : Z.simplices) {
    double d = vsigma_distance(Z, s, z);
    if (d > 0) raw[s] = d;
    total += d;
  }
  if (!(total > 0)) throw InvalidPartition("canonical partition denominator vanished");
  for (auto& [s, d] : raw) d /= total;
  return raw;
}

double canonical_partition(const SimplicialComplex& Z, const Simplex& sigma,
                           const RealizationPoint& z) {
  double total = 0;
  for (const auto& s : Z.simplices) total += vsigma_distance(Z, s, z);
  if (!(total > 0)) throw InvalidPartition("canonical partition denominator vanished");
  return vsigma_distance(Z, sigma, z) / total;
}

Simplex lebesgue_radius_check(const SimplicialComplex& Z, const RealizationPoint& z) {
  int d = Z.dimension();
  double need = 2.0 / ((d + 1) * (d + 2));
  std::vector<std::pair<double, int>> sorted;  // (coord, vertex), descending
  for (const auto& [v, x] : z.coords) sorted.push_back({x, v});
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  // gap k: z_(k) - z_(k+1) with z beyond the support read as 0; some gap at
  // level k <= d+1 meets the threshold since sum_k k*gap_k = sum z = 1
  int m = static_cast<int>(sorted.size());
  for (int k = 1; k <= std::min(m, d + 1); ++k) {
    double next = k < m ? sorted[k].first : 0.0;
    if (sorted[k - 1].first - next >= need) {
      Simplex sigma;
      for (int i = 0; i < k; ++i) sigma.push_back(sorted[i].second);
      std::sort(sigma.begin(), sigma.end());
      return sigma;
    }
  }
  throw InvalidPartition("no admissible coordinate gap; point not in |Z|?");
}

RealizationPoint NerveMap::at(const Pt& p) const {
  RealizationPoint z;
  double sum = 0;
  for (std::size_t i = 0; i < pou.size(); ++i) {
    double x = pou[i].eval(p).real();
    if (x < -1e-9) throw InvalidPartition("negative partition value");
    if (x > 0) z.coords[static_cast<int>(i)] = x;
    sum += std::max(0.0, x);
  }
  if (sum < 1.0) z.coords[complement_vertex] = 1.0 - sum;
  z.normalize();
  return z;
}

RealizationPoint NerveMap::at_sample(std::size_t idx) const {
  RealizationPoint z;
  double sum = 0;
  for (std::size_t i = 0; i < pou.size(); ++i) {
    double x = pou[i].v[idx].real();
    if (x < -1e-9) throw InvalidPartition("negative partition value");
    if (x > 0) z.coords[static_cast<int>(i)] = x;
    sum += std::max(0.0, x);
  }
  if (sum < 1.0) z.coords[complement_vertex] = 1.0 - sum;
  z.normalize();
  return z;
}

NerveMap map_to_nerve(const std::vector<ScalarField>& pou,
                      const std::vector<std::vector<int>>& cover) {
  if (pou.size() != cover.size()) throw UsageError("pou/cover size mismatch");
  NerveMap nm;
  nm.complement_vertex = static_cast<int>(cover.size());
  nm.pou = pou;
  // augment with the not-fully-covered sample set
  std::vector<std::vector<int>> aug = cover;
  std::vector<int> rest;
  if (!pou.empty()) {
    const SampledSpace& sp = *pou[0].space;
    for (std::size_t i = 0; i < sp.size(); ++i) {
      double s = 0;
      for (const auto& f : pou) s += f.v[i].real();
      if (s < 1.0 - 1e-9) rest.push_back(static_cast<int>(i));
    }
  }
  aug.push_back(rest);
  nm.complex = nerve(aug);
  return nm;
}

}  // namespace flowdim
