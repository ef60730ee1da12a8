#pragma once
// Data-parallel inner loops shared by field and convolution code.
// Scalar reference implementations always exist; an AVX2 variant is picked at
// runtime when the CPU supports it. Both variants are equivalence-tested.

#include <complex>
#include <cstddef>

namespace flowdim::kernels {

using cplx = std::complex<double>;

// max over i of |v[i]| (exact sup norm of a sampled field)
double sup_abs(const cplx* v, std::size_t n);

// dst[i] += scale * a[i] * b[i]
void cmul_acc(cplx* dst, const cplx* a, const cplx* b, cplx scale, std::size_t n);

// dst[i] += w * a[i]
void axpy(cplx* dst, const cplx* a, cplx w, std::size_t n);

// sum of w[i] * v[i] (quadrature accumulation)
cplx weighted_sum(const cplx* v, const double* w, std::size_t n);

// max over i of |a[i] - b[i]|
double sup_abs_diff(const cplx* a, const cplx* b, std::size_t n);

// Active backend name: "avx2" or "scalar".
const char* backend();

// Scalar reference versions, exposed for the equivalence tests.
namespace ref {
double sup_abs(const cplx* v, std::size_t n);
void cmul_acc(cplx* dst, const cplx* a, const cplx* b, cplx scale, std::size_t n);
void axpy(cplx* dst, const cplx* a, cplx w, std::size_t n);
cplx weighted_sum(const cplx* v, const double* w, std::size_t n);
double sup_abs_diff(const cplx* a, const cplx* b, std::size_t n);
}  // namespace ref

}  // namespace flowdim::kernels
