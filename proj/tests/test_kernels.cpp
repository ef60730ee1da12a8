#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "flowdim/kernels.hpp"
#include "flowdim/util.hpp"

#include <vector>

using namespace flowdim;
using flowdim::kernels::cplx;
namespace k = flowdim::kernels;

namespace {
std::vector<cplx> random_vec(SplitMix64& rng, std::size_t n) {
  std::vector<cplx> v(n);
  for (auto& z : v) z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return v;
}
}  // namespace

// Dispatched backend must agree with the scalar reference bit-for-bit on the
// elementwise ops and to rounding noise on reductions.
TEST_CASE("backend equivalence") {
  SplitMix64 rng(42);
  for (std::size_t n : {0ul, 1ul, 2ul, 3ul, 17ul, 256ul, 1001ul}) {
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);
    std::vector<double> w(n);
    for (auto& x : w) x = rng.uniform(0, 1);
    cplx scale{0.3, -0.7};

    CHECK(k::sup_abs(a.data(), n) == doctest::Approx(k::ref::sup_abs(a.data(), n)).epsilon(1e-15));
    CHECK(k::sup_abs_diff(a.data(), b.data(), n) ==
          doctest::Approx(k::ref::sup_abs_diff(a.data(), b.data(), n)).epsilon(1e-15));

    auto d1 = random_vec(rng, n);
    auto d2 = d1;
    k::cmul_acc(d1.data(), a.data(), b.data(), scale, n);
    k::ref::cmul_acc(d2.data(), a.data(), b.data(), scale, n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(d1[i] - d2[i]) < 1e-14);

    auto e1 = random_vec(rng, n);
    auto e2 = e1;
    k::axpy(e1.data(), a.data(), scale, n);
    k::ref::axpy(e2.data(), a.data(), scale, n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(e1[i] - e2[i]) < 1e-14);

    cplx s1 = k::weighted_sum(a.data(), w.data(), n);
    cplx s2 = k::ref::weighted_sum(a.data(), w.data(), n);
    CHECK(std::abs(s1 - s2) < 1e-12 * (1 + std::abs(s2)));
  }
  MESSAGE("active backend: ", k::backend());
}

TEST_CASE("sup_abs exactness") {
  std::vector<cplx> v{{3, 4}, {0, 0}, {-1, 1}};
  CHECK(k::sup_abs(v.data(), v.size()) == doctest::Approx(5.0));
}
