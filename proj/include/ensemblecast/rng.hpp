#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace ecast {

// All randomness in the toolkit flows through the two primitives below:
// splitmix64 for seeding/stream derivation and xoshiro256++ for draws.
// Results are reproducible on any platform with IEEE-754 doubles; no
// cross-language bit compatibility is promised.

inline std::uint64_t splitmix64_next(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derives an independent sub-seed from (seed, stream). Used for ensemble
// member seeds, per-octave seeds, and per-variable synthetic components.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ull * (stream + 1));
  return splitmix64_next(s);
}

// xoshiro256++ seeded through splitmix64.
class Rng {
public:
  explicit Rng(std::uint64_t seed) noexcept {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64_next(s);
  }

  std::uint64_t next() noexcept {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double unit() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller. Consumes exactly two uniforms per draw
  // so call sequences stay aligned regardless of caller structure.
  double normal() noexcept {
    const double u1 = 1.0 - unit();  // (0, 1]
    const double u2 = unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi_ * u2);
  }

  double normal(double mu, double sigma) noexcept { return mu + sigma * normal(); }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  static constexpr double pi_ = 3.14159265358979323846;
  std::array<std::uint64_t, 4> state_;
};

}  // namespace ecast
