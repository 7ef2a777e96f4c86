#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace vrjp {

// Philox4x32-10 block function (Salmon et al., Random123).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    std::uint64_t p0 = std::uint64_t(M0) * ctr[0];
    std::uint64_t p1 = std::uint64_t(M1) * ctr[2];
    ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
           std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
    key[0] += W0;
    key[1] += W1;
  }
  return ctr;
}

// xoshiro256++ (Blackman and Vigna).
struct Xoshiro256pp {
  using result_type = std::uint64_t;
  std::uint64_t s[4];

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  result_type operator()() {
    const std::uint64_t r = rotl(s[0] + s[3], 23) + s[0];
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return r;
  }
  bool operator==(const Xoshiro256pp& o) const {
    return s[0] == o.s[0] && s[1] == o.s[1] && s[2] == o.s[2] && s[3] == o.s[3];
  }
};

// Stream for trajectory `index` under `master_seed`. The xoshiro state is
// two Philox blocks keyed by the seed with counter (index, purpose, block).
inline Xoshiro256pp trajectory_stream(std::uint64_t master_seed,
                                      std::uint64_t index,
                                      std::uint32_t purpose = 0) {
  std::array<std::uint32_t, 2> key{std::uint32_t(master_seed),
                                   std::uint32_t(master_seed >> 32)};
  Xoshiro256pp g{};
  for (std::uint32_t blk = 0; blk < 2; ++blk) {
    auto out = philox4x32(
        {std::uint32_t(index), std::uint32_t(index >> 32), purpose, blk}, key);
    g.s[2 * blk] = (std::uint64_t(out[0]) << 32) | out[1];
    g.s[2 * blk + 1] = (std::uint64_t(out[2]) << 32) | out[3];
  }
  if ((g.s[0] | g.s[1] | g.s[2] | g.s[3]) == 0) g.s[0] = 1;
  return g;
}

// Uniform in [0, 1) with 53 random bits.
inline double uniform01(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Uniform in (0, 1), never 0 or 1.
inline double uniform_open(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

}  // namespace vrjp
