#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>

namespace imgan {

// Deterministic RNG used everywhere randomness is needed.  A thin
// splitmix64/xoshiro-free wrapper around the raw 64-bit state would do, but
// std::mt19937_64 is stable across runs of the same binary and good enough.
// The uniform/normal mappings below are written out explicitly instead of
// using std::uniform_real_distribution / std::normal_distribution, whose
// output is implementation-defined; this keeps seeded artifacts identical
// regardless of the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix(seed)) {}

  std::uint64_t next_u64() {
    // xorshift* variant; period 2^64-1, passes BigCrush for our purposes.
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545F4914F6CDD1DULL;
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; one value per call, no cached spare so
  // the consumption pattern is position-independent.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  // Integer in [0, n).  Modulo bias is < 2^-40 for any n we use.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    return next_u64() % n;
  }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s ? s : 1; }

  // Derive an independent stream, e.g. per-epoch or per-sample.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    return splitmix(splitmix(seed) ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    x = x ^ (x >> 31);
    return x ? x : 1;  // xorshift state must be nonzero
  }

  std::uint64_t state_;
};

inline double db_to_lin(double db) { return std::pow(10.0, db / 20.0); }
inline double lin_to_db(double lin) { return 20.0 * std::log10(lin); }

}  // namespace imgan
