#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "flowdim/simplicial.hpp"

#include <cmath>

using namespace flowdim;

namespace {

RealizationPoint point_at(std::initializer_list<std::pair<int, double>> cs) {
  RealizationPoint z;
  for (auto [v, x] : cs) z.coords[v] = x;
  z.normalize();
  return z;
}

SimplicialComplex random_complex(SplitMix64& rng, int nv, int max_dim, int n_max) {
  std::vector<Simplex> maximal;
  for (int i = 0; i < n_max; ++i) {
    int sz = 1 + rng.uniform_int(max_dim + 1);
    Simplex s;
    while (static_cast<int>(s.size()) < sz) {
      int v = rng.uniform_int(nv);
      if (std::find(s.begin(), s.end(), v) == s.end()) s.push_back(v);
    }
    maximal.push_back(s);
  }
  return SimplicialComplex::from_maximal(maximal);
}

RealizationPoint random_point(SplitMix64& rng, const SimplicialComplex& Z) {
  auto maximal = Z.maximal();
  const Simplex& s = maximal[rng.uniform_int(static_cast<int>(maximal.size()))];
  RealizationPoint z;
  for (int v : s) z.coords[v] = -std::log(rng.uniform() + 1e-300);
  z.normalize();
  return z;
}

}  // namespace

TEST_CASE("l1 distance") {
  auto Z = SimplicialComplex::from_maximal({{0, 1, 2}});
  auto p = point_at({{0, 0.5}, {1, 0.5}});
  CHECK(l1_distance(p, p) == doctest::Approx(0.0));
  CHECK(l1_distance(point_at({{0, 1.0}}), point_at({{2, 1.0}})) == doctest::Approx(2.0));
  // edge barycenter vs endpoint: |1/2-1| + |1/2-0| = 1
  CHECK(l1_distance(p, point_at({{0, 1.0}})) == doctest::Approx(1.0));

  // triangle inequality on random triples
  SplitMix64 rng(1);
  auto W = random_complex(rng, 8, 3, 5);
  for (int k = 0; k < 200; ++k) {
    auto a = random_point(rng, W), b = random_point(rng, W), c = random_point(rng, W);
    CHECK(l1_distance(a, c) <= l1_distance(a, b) + l1_distance(b, c) + 1e-12);
  }
}

TEST_CASE("nerve") {
  // two disjoint sets -> two isolated vertices
  auto Z = nerve({{0, 1}, {2, 3}});
  CHECK(Z.dimension() == 0);
  CHECK(Z.vertices.size() == 2);

  // chain -> path complex of dimension 1
  auto P = nerve({{0, 1}, {1, 2}, {2, 3}});
  CHECK(P.dimension() == 1);
  CHECK(P.has({0, 1}));
  CHECK(P.has({1, 2}));
  CHECK(!P.has({0, 2}));

  // random covers: nerve dimension + 1 equals brute-force multiplicity
  SplitMix64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    int nsets = 3 + rng.uniform_int(8), univ = 20;
    std::vector<std::vector<int>> cover(nsets);
    for (auto& s : cover)
      for (int x = 0; x < univ; ++x)
        if (rng.uniform() < 0.25) s.push_back(x);
    auto N = nerve(cover);
    int mult = 0;
    for (int x = 0; x < univ; ++x) {
      int c = 0;
      for (const auto& s : cover) c += std::count(s.begin(), s.end(), x) ? 1 : 0;
      mult = std::max(mult, c);
    }
    CHECK(N.dimension() + 1 == mult);
  }
}

TEST_CASE("canonical membership") {
  auto Z = SimplicialComplex::from_maximal({{0, 1, 2}, {2, 3}});
  CHECK(canonical_member(Z, {0}, point_at({{0, 1.0}})));
  CHECK(canonical_member(Z, {0, 1}, point_at({{0, 0.5}, {1, 0.5}})));
  CHECK(!canonical_member(Z, {0}, point_at({{0, 0.5}, {1, 0.5}})));

  // at most one member sigma per dimension at any point
  SplitMix64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto W = random_complex(rng, 9, 4, 6);
    auto z = random_point(rng, W);
    std::map<int, int> per_dim;
    for (const auto& s : W.simplices)
      if (canonical_member(W, s, z)) per_dim[static_cast<int>(s.size()) - 1]++;
    for (auto [dim, count] : per_dim) CHECK(count <= 1);
  }
}

TEST_CASE("canonical partition") {
  auto Z = SimplicialComplex::from_maximal({{0, 1, 2}, {2, 3}});
  // vertex point: nu at that vertex is 1
  CHECK(canonical_partition(Z, {0}, point_at({{0, 1.0}})) == doctest::Approx(1.0));
  CHECK(canonical_partition(Z, {0, 1}, point_at({{0, 1.0}})) == doctest::Approx(0.0));

  SplitMix64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto W = random_complex(rng, 8, 5, 6);
    int d = W.dimension();
    // partition sums to 1 and is supported in the canonical sets
    for (int k = 0; k < 50; ++k) {
      auto z = random_point(rng, W);
      auto parts = canonical_partition_all(W, z);
      double sum = 0;
      for (auto& [s, x] : parts) {
        sum += x;
        CHECK(x >= 0.0);
        CHECK(canonical_member(W, s, z));
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    // empirical Lipschitz ratio against the closed-form bound
    double bound = 2.0 * (d + 1) * (d + 2) * (2 * d + 3);
    for (int k = 0; k < 500; ++k) {
      auto p = random_point(rng, W);
      auto q = random_point(rng, W);
      double dist = l1_distance(p, q);
      if (dist < 1e-9) continue;
      auto pp = canonical_partition_all(W, p);
      auto pq = canonical_partition_all(W, q);
      double worst = 0;
      for (const auto& [s, x] : pp) worst = std::max(worst, std::abs(x - (pq.count(s) ? pq[s] : 0.0)));
      for (const auto& [s, x] : pq)
        if (!pp.count(s)) worst = std::max(worst, x);
      CHECK(worst / dist <= bound + 1e-9);
    }
  }
}

TEST_CASE("lebesgue radius") {
  auto Z = SimplicialComplex::from_maximal({{0, 1, 2, 3}});
  int d = Z.dimension();
  double radius = 1.0 / ((d + 1) * (d + 2));

  CHECK(lebesgue_radius_check(Z, point_at({{1, 1.0}})) == Simplex{1});
  CHECK(lebesgue_radius_check(Z, point_at({{0, 0.25}, {1, 0.25}, {2, 0.25}, {3, 0.25}})) ==
        Simplex{0, 1, 2, 3});

  SplitMix64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    auto W = random_complex(rng, 8, 4, 5);
    int dw = W.dimension();
    double rw = 1.0 / ((dw + 1) * (dw + 2));
    for (int k = 0; k < 20; ++k) {
      auto z = random_point(rng, W);
      auto sigma = lebesgue_radius_check(W, z);
      REQUIRE(W.has(sigma));
      CHECK(canonical_member(W, sigma, z));
      // sample points of the ball around z and check containment in V_sigma
      int accepted = 0;
      for (int trial2 = 0; trial2 < 400 && accepted < 100; ++trial2) {
        RealizationPoint w = z;
        // perturb within a random coface or toward a random vertex
        Simplex supp = z.support();
        Simplex target = supp;
        int v = W.vertices[rng.uniform_int(static_cast<int>(W.vertices.size()))];
        if (!std::binary_search(target.begin(), target.end(), v)) {
          target.push_back(v);
          std::sort(target.begin(), target.end());
        }
        if (!W.has(target)) continue;
        for (int u : target) w.coords[u] = std::max(0.0, w.at(u) + rng.uniform(-rw / 2, rw / 2));
        w.normalize();
        if (w.coords.empty() || l1_distance(z, w) > rw) continue;
        ++accepted;
        CHECK(canonical_member(W, sigma, w));
      }
    }
  }
}

TEST_CASE("map to nerve") {
  auto circ = FlowSpec::circle(1.0);
  auto space = make_circle_space(circ, 64);
  auto bump = [](double c, double halfw) {
    return [c, halfw](const Pt& p) -> cplx {
      double d = circ_norm(p[0] - c);
      return std::max(0.0, 1.0 - d / halfw);
    };
  };
  ScalarField f0(space, bump(0.2, 0.2)), f1(space, bump(0.6, 0.2));
  std::vector<std::vector<int>> cover(2);
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (std::abs(f0.v[i]) > 0) cover[0].push_back(static_cast<int>(i));
    if (std::abs(f1.v[i]) > 0) cover[1].push_back(static_cast<int>(i));
  }
  auto nm = map_to_nerve({f0, f1}, cover);

  // deep inside U0 with mu0 = 1: vertex point 0
  auto z = nm.at(Pt{0.2});
  CHECK(z.at(0) == doctest::Approx(1.0));

  // outside both supports: complement vertex
  auto zc = nm.at(Pt{0.9});
  CHECK(zc.at(nm.complement_vertex) == doctest::Approx(1.0));

  // star-preimage containment: positive mu_U coordinate only inside U
  for (std::size_t i = 0; i < space.size(); ++i) {
    auto zi = nm.at_sample(i);
    REQUIRE(nm.complex.has(zi.support()));
    for (int u = 0; u < 2; ++u)
      if (zi.at(u) > 0)
        CHECK(std::count(cover[u].begin(), cover[u].end(), static_cast<int>(i)) == 1);
  }
}

TEST_CASE("json round trip") {
  auto Z = SimplicialComplex::from_maximal({{0, 1, 2}, {2, 3}, {5}});
  auto W = SimplicialComplex::parse_json(Z.to_json());
  CHECK(W.simplices == Z.simplices);
  CHECK(W.vertices == Z.vertices);
}
