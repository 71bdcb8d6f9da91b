#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace ipseg {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256** with splitmix64 seeding. Self-contained so streams are
// bit-identical across platforms and trivially serializable (4 words).
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) { reseed(seed); }

  void reseed(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  int64_t uniform_int(int64_t n) {
    return n <= 1 ? 0 : static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
  }

  // Box-Muller without caching so the draw count per call is fixed.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  std::array<uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<uint64_t, 4>& s) { s_ = s; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<uint64_t, 4> s_{};
};

// Independent stream for (run seed, slot, step, purpose). Hash-derived so
// resuming a run at step t reproduces the exact stream without replay.
inline Rng derive_rng(uint64_t seed, uint64_t a = 0, uint64_t b = 0, uint64_t c = 0) {
  uint64_t sm = seed;
  uint64_t h = splitmix64(sm);
  sm = h ^ (a + 0x9e3779b97f4a7c15ULL);
  h = splitmix64(sm);
  sm = h ^ (b + 0xc2b2ae3d27d4eb4fULL);
  h = splitmix64(sm);
  sm = h ^ (c + 0x165667b19e3779f9ULL);
  return Rng(splitmix64(sm));
}

}  // namespace ipseg
