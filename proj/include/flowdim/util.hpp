#pragma once
#include <cstdint>
#include <functional>

namespace flowdim {

// Global worker count. 0 = hardware concurrency. Set from --threads or
// FLOWDIM_THREADS before any parallel work starts.
void set_thread_count(int n);
int thread_count();

// Splits [0, n) into contiguous chunks, one worker thread per chunk.
// fn must be safe to call concurrently on disjoint indices.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

// Deterministic 64-bit generator for randomized property checks.
struct SplitMix64 {
  std::uint64_t s;
  explicit SplitMix64(std::uint64_t seed) : s(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return (next() >> 11) * 0x1.0p-53; }  // [0,1)
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int uniform_int(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }
};

inline double frac(double x) {
  double f = x - static_cast<std::int64_t>(x);
  return f < 0 ? f + 1.0 : f;
}

// distance to the nearest integer
inline double circ_norm(double x) {
  double f = frac(x);
  return f < 0.5 ? f : 1.0 - f;
}

// representative of x mod 1 in [-1/2, 1/2)
inline double centered_frac(double x) {
  double f = frac(x);
  return f < 0.5 ? f : f - 1.0;
}

}  // namespace flowdim
