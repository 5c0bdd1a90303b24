#pragma once

#include <cmath>
#include <cstdint>

namespace riskplan {

// splitmix64; used both as a stream mixer and as the generator core so that
// sampled values are identical across standard libraries and platforms.
inline uint64_t splitmix64_next(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // Warm the state so small seeds decorrelate.
    splitmix64_next(state_);
    splitmix64_next(state_);
  }

  // Derives an independent stream, e.g. per trial or per agent.
  static Rng stream(uint64_t master, uint64_t index) {
    uint64_t s = master;
    splitmix64_next(s);
    s ^= 0x9e3779b97f4a7c15ULL * (index + 1);
    return Rng(s);
  }

  uint64_t next_u64() { return splitmix64_next(state_); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Marsaglia polar method, one cached deviate.
  double normal() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    cache_ = v * m;
    has_cache_ = true;
    return u * m;
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return next_u64() % n; }

 private:
  uint64_t state_;
  double cache_ = 0.0;
  bool has_cache_ = false;
};

}  // namespace riskplan
