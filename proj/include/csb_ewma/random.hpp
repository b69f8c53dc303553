#ifndef CSB_EWMA_RANDOM_HPP_
#define CSB_EWMA_RANDOM_HPP_

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace csb_ewma {

/// One round of the splitmix64 mixer. Used both as a seed sequence and as the
/// hash behind counter-based substream derivation.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent 64-bit seed from a master seed and a tuple of
/// counters (replication index, grid cell, family, ...). The result depends
/// only on the inputs, never on scheduling.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> counters) noexcept {
  std::uint64_t state = master;
  std::uint64_t out = splitmix64(state);
  for (std::uint64_t c : counters) {
    state = out ^ (c + 0x632be59bd9b4e019ULL);
    out = splitmix64(state);
  }
  return out;
}

/// xoshiro256** generator (Blackman & Vigna). Satisfies
/// UniformRandomBitGenerator so it also works with <random> distributions.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed) noexcept {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform draw on the open interval (0, 1): 53 random bits, centred in
  /// their bucket so neither endpoint is reachable.
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
};

}  // namespace csb_ewma

#endif  // CSB_EWMA_RANDOM_HPP_
