#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace dynacl {

inline uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ with hand-rolled distributions. The standard <random>
// distributions are implementation-defined, so every stochastic draw in the
// artifact goes through this class to keep runs reproducible bit-for-bit.
class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : state_) w = splitmix64(x);
  }

  // Derives a child seed from a list of stream coordinates, e.g.
  // {global_seed, tag, epoch, sample}. Order-sensitive by construction.
  static uint64_t derive(std::initializer_list<uint64_t> coords) {
    uint64_t x = 0x6a09e667f3bcc909ULL;
    for (uint64_t c : coords) {
      x ^= c + 0x9e3779b97f4a7c15ULL + (x << 6) + (x >> 2);
      (void)splitmix64(x);
    }
    return splitmix64(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive range; rejection-free modulo bias is negligible for our ranges
  // but we use rejection sampling anyway to keep draws exact.
  int uniform_int(int lo, int hi) {
    uint64_t span = uint64_t(hi - lo) + 1;
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return lo + int(r % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller without a cached spare: one draw costs two uniforms but the
  // generator state never carries hidden values, which keeps serialization
  // and stream-splitting trivial.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586477 * u2);
  }

  std::array<uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<uint64_t, 4> state_{};
};

}  // namespace dynacl
