#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qrlab {

inline constexpr const char* kVersion = "0.1.0";

// Error taxonomy mirrors the CLI exit codes: 1 config, 2 precondition, 3 invariant.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- diagnostics

namespace diag {

inline std::atomic<long>& aliasing_count() {
  static std::atomic<long> c{0};
  return c;
}

// Top-of-band energy warning; never fatal, but counted and reported.
inline void note_aliasing(double fraction) {
  long k = aliasing_count().fetch_add(1) + 1;
  if (k <= 3)
    std::fprintf(stderr, "warning: top-mode energy fraction %.3e exceeds 1e-6 (aliasing risk)\n",
                 fraction);
}

inline void reset() { aliasing_count().store(0); }

}  // namespace diag

// ------------------------------------------------------------------------ rng

// Deterministic, platform-independent stream: splitmix64 bits, explicit
// Box-Muller.  <random> distributions are implementation-defined, so they are
// avoided for anything that lands in an output file.
struct Rng {
  std::uint64_t state;
  bool has_spare = false;
  double spare = 0.0;

  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }      // [0,1)
  double uniform_pos() { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }  // (0,1]

  double normal() {
    if (has_spare) {
      has_spare = false;
      return spare;
    }
    double u1 = uniform_pos();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare = r * std::sin(a);
    has_spare = true;
    return r * std::cos(a);
  }
};

// Per-sample substream: mixes the run seed with the sample index so results
// do not depend on which worker picks up the sample.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t index) {
  Rng mix(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
  mix.next();
  return mix.next();
}

// ------------------------------------------------------------- gamma / volume

// Gamma(twice/2) for twice >= 1, built by the recursion Gamma(x+1) = x Gamma(x)
// from Gamma(1/2) = sqrt(pi) and Gamma(1) = 1.
inline double gamma_half_int(int twice) {
  double g = (twice % 2 == 0) ? 1.0 : std::sqrt(M_PI);
  for (int k = twice % 2 == 0 ? 2 : 1; k < twice; k += 2) g *= 0.5 * k;
  return g;
}

// Volume of the unit m-sphere: 2 pi^{(m+1)/2} / Gamma((m+1)/2).
inline double sphere_volume(int m) {
  return 2.0 * std::pow(M_PI, 0.5 * (m + 1)) / gamma_half_int(m + 1);
}

// -------------------------------------------------------------------- threads

inline int worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  int n = hw == 0 ? 1 : static_cast<int>(hw);
  if (const char* env = std::getenv("QRLAB_THREADS")) {
    char* end = nullptr;
    long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1 && cap < 1024) n = std::min<long>(n, cap);
  }
  return n;
}

// Static block partition; body(i) must only write to slot i of preallocated
// storage so the emission order never depends on scheduling.
template <class F>
void parallel_for(int nitems, F&& body) {
  int workers = std::min(worker_count(), std::max(1, nitems));
  if (workers <= 1) {
    for (int i = 0; i < nitems; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  int chunk = (nitems + workers - 1) / workers;
  for (int wkr = 0; wkr < workers; ++wkr) {
    int lo = wkr * chunk, hi = std::min(nitems, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (int i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace qrlab
