#include "flowdim/kernels.hpp"

#include <algorithm>
#include <cmath>

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define FLOWDIM_X86 1
#endif

namespace flowdim::kernels {

namespace ref {

double sup_abs(const cplx* v, std::size_t n) {
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double a = std::norm(v[i]);
    if (a > m2) m2 = a;
  }
  return std::sqrt(m2);
}

void cmul_acc(cplx* dst, const cplx* a, const cplx* b, cplx scale, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += scale * a[i] * b[i];
}

void axpy(cplx* dst, const cplx* a, cplx w, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += w * a[i];
}

cplx weighted_sum(const cplx* v, const double* w, std::size_t n) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * v[i];
  return s;
}

double sup_abs_diff(const cplx* a, const cplx* b, std::size_t n) {
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = std::norm(a[i] - b[i]);
    if (d > m2) m2 = d;
  }
  return std::sqrt(m2);
}

}  // namespace ref

#ifdef FLOWDIM_X86
namespace avx2 {

// complex arrays are interleaved (re,im); 2 complexes per 256-bit lane

__attribute__((target("avx2"))) static inline __m256d cmul(__m256d a, __m256d b) {
  // (ar*br - ai*bi, ar*bi + ai*br) for both packed complexes
  __m256d ar = _mm256_shuffle_pd(a, a, 0x0);   // ar ar ar ar
  __m256d ai = _mm256_shuffle_pd(a, a, 0xF);   // ai ai ai ai
  __m256d bs = _mm256_shuffle_pd(b, b, 0x5);   // bi br bi br
  return _mm256_addsub_pd(_mm256_mul_pd(ar, b), _mm256_mul_pd(ai, bs));
}

__attribute__((target("avx2"))) double sup_abs(const cplx* v, std::size_t n) {
  const double* p = reinterpret_cast<const double*>(v);
  std::size_t i = 0;
  __m256d acc = _mm256_setzero_pd();
  for (; i + 2 <= n; i += 2) {
    __m256d x = _mm256_loadu_pd(p + 2 * i);
    __m256d sq = _mm256_mul_pd(x, x);
    __m256d sw = _mm256_shuffle_pd(sq, sq, 0x5);
    acc = _mm256_max_pd(acc, _mm256_add_pd(sq, sw));
  }
  alignas(32) double out[4];
  _mm256_store_pd(out, acc);
  double m2 = std::max(std::max(out[0], out[1]), std::max(out[2], out[3]));
  for (; i < n; ++i) m2 = std::max(m2, std::norm(v[i]));
  return std::sqrt(m2);
}

__attribute__((target("avx2"))) void cmul_acc(cplx* dst, const cplx* a, const cplx* b, cplx scale, std::size_t n) {
  double* d = reinterpret_cast<double*>(dst);
  const double* pa = reinterpret_cast<const double*>(a);
  const double* pb = reinterpret_cast<const double*>(b);
  __m256d sc = _mm256_setr_pd(scale.real(), scale.imag(), scale.real(), scale.imag());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d x = _mm256_loadu_pd(pa + 2 * i);
    __m256d y = _mm256_loadu_pd(pb + 2 * i);
    __m256d z = cmul(cmul(x, y), sc);
    _mm256_storeu_pd(d + 2 * i, _mm256_add_pd(_mm256_loadu_pd(d + 2 * i), z));
  }
  for (; i < n; ++i) dst[i] += scale * a[i] * b[i];
}

__attribute__((target("avx2"))) void axpy(cplx* dst, const cplx* a, cplx w, std::size_t n) {
  double* d = reinterpret_cast<double*>(dst);
  const double* pa = reinterpret_cast<const double*>(a);
  __m256d wv = _mm256_setr_pd(w.real(), w.imag(), w.real(), w.imag());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d x = _mm256_loadu_pd(pa + 2 * i);
    __m256d z = cmul(x, wv);
    _mm256_storeu_pd(d + 2 * i, _mm256_add_pd(_mm256_loadu_pd(d + 2 * i), z));
  }
  for (; i < n; ++i) dst[i] += w * a[i];
}

__attribute__((target("avx2"))) cplx weighted_sum(const cplx* v, const double* w, std::size_t n) {
  const double* p = reinterpret_cast<const double*>(v);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d x = _mm256_loadu_pd(p + 2 * i);
    __m256d wv = _mm256_setr_pd(w[i], w[i], w[i + 1], w[i + 1]);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(x, wv));
  }
  alignas(32) double out[4];
  _mm256_store_pd(out, acc);
  cplx s(out[0] + out[2], out[1] + out[3]);
  for (; i < n; ++i) s += w[i] * v[i];
  return s;
}

__attribute__((target("avx2"))) double sup_abs_diff(const cplx* a, const cplx* b, std::size_t n) {
  const double* pa = reinterpret_cast<const double*>(a);
  const double* pb = reinterpret_cast<const double*>(b);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d x = _mm256_sub_pd(_mm256_loadu_pd(pa + 2 * i), _mm256_loadu_pd(pb + 2 * i));
    __m256d sq = _mm256_mul_pd(x, x);
    __m256d sw = _mm256_shuffle_pd(sq, sq, 0x5);
    acc = _mm256_max_pd(acc, _mm256_add_pd(sq, sw));
  }
  alignas(32) double out[4];
  _mm256_store_pd(out, acc);
  double m2 = std::max(std::max(out[0], out[1]), std::max(out[2], out[3]));
  for (; i < n; ++i) m2 = std::max(m2, std::norm(a[i] - b[i]));
  return std::sqrt(m2);
}

}  // namespace avx2
#endif  // FLOWDIM_X86

namespace {

struct Dispatch {
  double (*sup_abs)(const cplx*, std::size_t);
  void (*cmul_acc)(cplx*, const cplx*, const cplx*, cplx, std::size_t);
  void (*axpy)(cplx*, const cplx*, cplx, std::size_t);
  cplx (*weighted_sum)(const cplx*, const double*, std::size_t);
  double (*sup_abs_diff)(const cplx*, const cplx*, std::size_t);
  const char* name;
};

Dispatch pick() {
#ifdef FLOWDIM_X86
  if (__builtin_cpu_supports("avx2")) {
    return {avx2::sup_abs, avx2::cmul_acc, avx2::axpy, avx2::weighted_sum,
            avx2::sup_abs_diff, "avx2"};
  }
#endif
  return {ref::sup_abs, ref::cmul_acc, ref::axpy, ref::weighted_sum,
          ref::sup_abs_diff, "scalar"};
}

const Dispatch& table() {
  static const Dispatch d = pick();
  return d;
}

}  // namespace

double sup_abs(const cplx* v, std::size_t n) { return table().sup_abs(v, n); }
void cmul_acc(cplx* dst, const cplx* a, const cplx* b, cplx scale, std::size_t n) {
  table().cmul_acc(dst, a, b, scale, n);
}
void axpy(cplx* dst, const cplx* a, cplx w, std::size_t n) { table().axpy(dst, a, w, n); }
cplx weighted_sum(const cplx* v, const double* w, std::size_t n) {
  return table().weighted_sum(v, w, n);
}
double sup_abs_diff(const cplx* a, const cplx* b, std::size_t n) {
  return table().sup_abs_diff(a, b, n);
}
const char* backend() { return table().name; }

}  // namespace flowdim::kernels
