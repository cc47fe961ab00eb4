#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace matchlab {

// xoshiro256++ with splitmix64 seeding. Hand-rolled on purpose: experiment
// records must be bit-identical across reruns and across parallel schedules,
// which rules out the unspecified std:: distribution implementations.
namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
inline std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }
} // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = detail::splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  // uniform in [0,1), 53 random bits
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // standard normal via Box-Muller; always consumes exactly two uniforms
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::array<std::uint64_t, 4> state_;
};

// Per-trial seed derived from (master seed, N, trial index); every record is
// reproducible from the triple alone, independent of scheduling.
inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t n, std::uint64_t trial) {
  std::uint64_t x = master;
  std::uint64_t h = detail::splitmix64(x);
  x ^= n * 0xD1342543DE82EF95ULL;
  h ^= detail::splitmix64(x);
  x ^= trial * 0xAF251AF3B0F025B5ULL;
  h ^= detail::splitmix64(x);
  return h;
}

} // namespace matchlab
