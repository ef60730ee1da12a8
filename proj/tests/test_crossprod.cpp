#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "flowdim/crossprod.hpp"

#include <cmath>

using namespace flowdim;

namespace {

constexpr double kTau = 6.283185307179586476925287;

const Check& get(const Certificate& c, const std::string& name) {
  for (const auto& ch : c.checks)
    if (ch.name == name) return ch;
  throw std::runtime_error("no check " + name);
}

// random element: (smooth time profile) x (trig polynomial on the circle)
ConvolutionElement random_element(const SampledSpace& space, const FlowSpec& flow, double t_max,
                                  double dt, SplitMix64& rng) {
  double c0 = rng.uniform(-1, 1), c1 = rng.uniform(-1, 1), c2 = rng.uniform(-1, 1);
  int k = rng.uniform_int(3) - 1;
  double width = rng.uniform(0.3, 0.5);
  auto profile = [c0, c1, width](double t) -> cplx {
    if (std::abs(t) >= width) return 0.0;
    double w = std::cos(M_PI * t / (2 * width));
    return (c0 + cplx(0, 1) * c1) * w * w;
  };
  ScalarField field(space, [c2, k](const Pt& p) -> cplx {
    return std::polar(1.0, kTau * k * p[0] + c2);
  });
  return tensor_element(space, flow, t_max, dt, profile, field);
}

}  // namespace

TEST_CASE("convolution basics: approximate unit and scalar reduction") {
  auto flow = FlowSpec::circle(1.0);
  auto space = make_circle_space(flow, 64);
  double dt = 1.0 / 256, t_max = 2.0;

  // delta-like bump of mass 1 acts as an approximate unit
  double w = 4 * dt;
  auto delta = tensor_element(space, flow, t_max, dt,
                              [w](double t) -> cplx {
                                double v = std::max(0.0, 1.0 - std::abs(t) / w);
                                return v / w;  // tent of mass 1
                              },
                              ScalarField(space, [](const Pt&) -> cplx { return 1.0; }));
  SplitMix64 rng(7);
  auto f = random_element(space, flow, t_max, dt, rng);
  auto fd = convolve(f, delta);
  CHECK(subtract(fd, f).sup_norm() < 20 * (dt + w));

  // constant fields: plain convolution on the line, checked against quadrature
  auto a = tensor_element(space, flow, t_max, dt,
                          [](double t) -> cplx { return std::abs(t) < 0.5 ? 1.0 : 0.0; },
                          ScalarField(space, [](const Pt&) -> cplx { return 1.0; }));
  auto aa = convolve(a, a);
  int i0 = aa.index_of(0.0);
  CHECK(std::abs(aa.values[i0].v[0] - 1.0) < 3 * dt);              // (1*1)(0) = 1
  CHECK(std::abs(aa.values[aa.index_of(0.75)].v[0] - 0.25) < 3 * dt);  // tent value

  // support overflow
  auto wide = tensor_element(space, flow, t_max, dt,
                             [](double t) -> cplx { return std::abs(t) < 1.5 ? 1.0 : 0.0; },
                             ScalarField(space, [](const Pt&) -> cplx { return 1.0; }));
  CHECK_THROWS_AS(convolve(wide, wide), WindowExceeded);
}

TEST_CASE("associativity at grid tolerance") {
  auto flow = FlowSpec::circle(1.0);
  auto space = make_circle_space(flow, 32);
  double dt = 1.0 / 128, t_max = 2.0;
  SplitMix64 rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    auto f = random_element(space, flow, t_max, dt, rng);
    auto g = random_element(space, flow, t_max, dt, rng);
    auto h = random_element(space, flow, t_max, dt, rng);
    auto lhs = convolve(convolve(f, g), h);
    auto rhs = convolve(f, convolve(g, h));
    double scale = f.l1_norm() * g.l1_norm() * h.l1_norm() + 1;
    CHECK(subtract(lhs, rhs).l1_norm() < 10 * dt * scale);
    // submultiplicativity at grid tolerance
    CHECK(convolve(f, g).l1_norm() <= f.l1_norm() * g.l1_norm() + 10 * dt * scale);
  }
}

TEST_CASE("adjoint is an isometric involution") {
  auto flow = FlowSpec::circle(1.0);
  auto space = make_circle_space(flow, 32);
  double dt = 1.0 / 128, t_max = 1.5;
  SplitMix64 rng(3);
  auto f = random_element(space, flow, t_max, dt, rng);
  auto ff = adjoint(adjoint(f));
  CHECK(subtract(ff, f).sup_norm() < 1e-12);
  CHECK(adjoint(f).l1_norm() == doctest::Approx(f.l1_norm()).epsilon(1e-9));

  // constructed self-adjoint element (real even profile, constant field)
  auto s = tensor_element(space, flow, t_max, dt,
                          [](double t) -> cplx { return std::max(0.0, 0.5 - t * t); },
                          ScalarField(space, [](const Pt&) -> cplx { return 1.0; }));
  CHECK(subtract(adjoint(s), s).sup_norm() < 1e-12);
}

TEST_CASE("trace: locality, traciality, positivity") {
  auto flow = FlowSpec::circle(1.0);
  auto space = make_circle_space(flow, 32);
  double dt = 1.0 / 128, t_max = 2.0;
  SplitMix64 rng(5);

  // supported away from t = 0: trace vanishes
  auto off = tensor_element(space, flow, t_max, dt,
                            [](double t) -> cplx { return std::abs(t - 0.7) < 0.2 ? 1.0 : 0.0; },
                            ScalarField(space, [](const Pt&) -> cplx { return 1.0; }));
  CHECK(std::abs(trace(off)) == 0.0);

  for (int trial = 0; trial < 10; ++trial) {
    auto f = random_element(space, flow, t_max, dt, rng);
    auto g = random_element(space, flow, t_max, dt, rng);
    double bound = 10 * dt * f.l1_norm() * g.l1_norm();
    CHECK(std::abs(trace(convolve(f, g)) - trace(convolve(g, f))) <= bound);
    CHECK(trace(convolve(f, adjoint(f))).real() >= -1e-9);
  }
}

TEST_CASE("transversal projection on the golden torus") {
  auto flow = FlowSpec::torus({1.0, std::sqrt(2.0)});
  double r = 0.1;
  std::vector<double> resid;
  for (int level = 0; level < 3; ++level) {
    auto space = make_torus_space(flow, 32 << level);
    double dt = 1.0 / (64 << level);
    auto res = transversal_projection(space, flow, "x2=0", r, dt);
    CHECK(res.cert.passed());
    CHECK(get(res.cert, "orthogonality_at_2r").measured == 0.0);
    CHECK(res.cert.params.at("trace_p") > 0);
    resid.push_back(get(res.cert, "idempotent_residual_l1").measured);
    // support confined to |t| <= 2r
    for (int i = 0; i < res.p.size(); ++i)
      if (std::abs(res.p.time_at(i)) > 2 * r + 1e-12) CHECK(res.p.values[i].sup_norm() == 0.0);
  }
  MESSAGE("transversal residuals: ", resid[0], " ", resid[1], " ", resid[2]);
  for (int k = 0; k + 1 < 3; ++k) {
    double ratio = resid[k + 1] / resid[k];
    CHECK(ratio > 0.3);
    CHECK(ratio < 0.7);
  }

  // 3r window hits the first return time: not transversal
  auto space = make_torus_space(flow, 64);
  CHECK_THROWS_AS(transversal_projection(space, flow, "x2=0", 0.4, 0.01), NotTransversal);
}

TEST_CASE("tiling projection on the Fibonacci hull") {
  auto flow = FlowSpec::fibonacci_hull(24.0);
  double r = 0.2;
  std::vector<double> resid;
  for (int level = 0; level < 3; ++level) {
    auto space = make_hull_space(flow, 512 << level, 16.0);
    double dt = 1.0 / (32 << level);
    auto res = tiling_projection(space, flow, r, dt);
    CHECK(res.cert.passed());
    CHECK(get(res.cert, "boundary_zero_at_2r").measured == 0.0);
    CHECK(get(res.cert, "pattern_equivariance").measured <= 1e-12);
    resid.push_back(get(res.cert, "idempotent_residual_l1").measured);
  }
  MESSAGE("tiling residuals: ", resid[0], " ", resid[1], " ", resid[2]);
  for (int k = 0; k + 1 < 3; ++k) {
    double ratio = resid[k + 1] / resid[k];
    CHECK(ratio > 0.3);
    CHECK(ratio < 0.7);
  }

  // a ball condition violation: r too large for the tile gaps
  auto space = make_hull_space(flow, 512, 16.0);
  CHECK_THROWS_AS(tiling_projection(space, flow, 0.3, 0.01), ParameterError);
}

TEST_CASE("modulation") {
  auto g = band_limited_window(1.0, 8.0, 1.0 / 32);
  auto g0 = modulate(g, 0.0);
  for (int i = 0; i < g.size(); ++i) CHECK(g0.values[i] == g.values[i]);
  auto g1 = modulate(g, -1.0);
  CHECK(g1.l1_norm() == doctest::Approx(g.l1_norm()).epsilon(1e-12));
  CHECK(std::abs(g.values[g.size() / 2] - cplx(0.5, 0.0)) < 1e-12);  // g(0) = A + B
}

TEST_CASE("stability witness from the exact circle frame") {
  auto flow = FlowSpec::circle(1.0);
  auto space = make_circle_space(flow, 16);
  auto w = [&] {
    RokhlinWitness rw;
    rw.M = 1.0;
    rw.p = kTau;
    rw.T = 10.0;
    rw.target_delta = 1e-9;
    rw.x.emplace_back(space, [](const Pt& p) -> cplx { return std::polar(1.0, kTau * p[0]); });
    rw.test_set.emplace_back(space, [](const Pt&) -> cplx { return 1.0; });
    return rw;
  }();
  std::vector<double> grid;
  for (int j = -10; j <= 10; ++j) grid.push_back(j);
  certify_witness(space, flow, w, grid);
  auto frame = eigenframe_from_witness(space, flow, w);

  double dt = 1.0 / 32, t_max = 50.0;
  double s = 0.04;  // Gaussian bandwidth inside the window plateau
  auto f = tensor_element(space, flow, t_max, dt,
                          [s](double t) -> cplx {
                            if (std::abs(t) > 10) return 0.0;
                            return std::exp(-std::pow(M_PI * s * t, 2));
                          },
                          ScalarField(space, [](const Pt&) -> cplx { return 1.0; }));
  auto b = convolve(f, adjoint(f));

  double eps = 0.05;
  auto sw = stability_witness(b, frame, eps);
  CHECK(sw.cert.passed());
  MESSAGE("yy*-b: ", get(sw.cert, "yy_star_minus_b_l1").measured, "  y^2: ",
          get(sw.cert, "y_sq_l1").measured, "  |y|^2: ", get(sw.cert, "y_norm_sq").measured);
  CHECK(get(sw.cert, "yy_star_minus_b_l1").measured <= 10 * eps + 5 * dt);
  CHECK(get(sw.cert, "y_sq_l1").measured <= 10 * eps + 5 * dt);
  CHECK(get(sw.cert, "y_norm_sq").measured <= 1.0 + 10 * eps + 5 * dt);
  CHECK(get(sw.cert, "modulation_orthogonality").measured == 0.0);  // d = 0: no pairs

  auto coarse = tensor_element(space, flow, 4.0, 0.5,
                               [](double t) -> cplx { return std::abs(t) < 1 ? 1.0 : 0.0; },
                               ScalarField(space, [](const Pt&) -> cplx { return 1.0; }));
  CHECK_THROWS_AS(stability_witness(coarse, frame, eps), ResolutionError);
}

TEST_CASE("element serialization") {
  auto flow = FlowSpec::circle(1.0);
  auto space = make_circle_space(flow, 8);
  auto f = tensor_element(space, flow, 1.0, 0.25,
                          [](double t) -> cplx { return std::abs(t) < 0.5 ? 1.0 : 0.0; },
                          ScalarField(space, [](const Pt&) -> cplx { return 1.0; }));
  write_element("elem_test_out", f);
  std::FILE* cf = std::fopen("elem_test_out.csv", "r");
  REQUIRE(cf != nullptr);
  char line[64] = {};
  REQUIRE(std::fgets(line, sizeof line, cf) != nullptr);
  std::fclose(cf);
  CHECK(std::string(line) == "t,sample,re,im\n");
  std::remove("elem_test_out.csv");
  std::remove("elem_test_out.json");
}
