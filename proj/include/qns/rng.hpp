// Deterministic RNG streams. Each trajectory gets an independent stream
// derived from (root seed, stream index) so results do not depend on how
// work is scheduled across threads.
#pragma once

#include <cmath>
#include <cstdint>

namespace qns {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ with splitmix-expanded seeding.
class Rng {
public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_)
      word = splitmix64(sm);
  }

  // Stream for one unit of parallel work.
  static Rng stream(std::uint64_t root_seed, std::uint64_t index) {
    std::uint64_t sm = root_seed;
    (void)splitmix64(sm);
    sm ^= 0xd1b54a32d192ed03ULL * (index + 1);
    return Rng(splitmix64(sm));
  }

  std::uint64_t u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return double(u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Marsaglia polar method (one spare cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // Poisson; Knuth product method for small means, normal approximation
  // with rounding for large ones (means here are photon counts, O(1..10)).
  long poisson(double mean) {
    if (mean <= 0.0)
      return 0;
    if (mean < 30.0) {
      const double limit = std::exp(-mean);
      long k = 0;
      double prod = uniform();
      while (prod > limit) {
        ++k;
        prod *= uniform();
      }
      return k;
    }
    const double v = mean + std::sqrt(mean) * normal();
    return v < 0.0 ? 0 : static_cast<long>(std::llround(v));
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace qns
