#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace liouvlab {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32-10 block function (Salmon et al. 2011).
inline PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// Stateless stream: every draw is a pure function of (seed, stream, a, b),
/// so results do not depend on which thread produces them or in what order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint32_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  PhiloxCounter block(std::uint64_t a, std::uint32_t b) const {
    return philox4x32({b, static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), stream_},
                      key_);
  }

  /// Two uniforms in (0,1) with 53-bit resolution.
  std::pair<double, double> uniform2(std::uint64_t a, std::uint32_t b) const {
    const auto w = block(a, b);
    return {to_unit(w[0], w[1]), to_unit(w[2], w[3])};
  }

  /// Two independent standard normals (Box-Muller).
  std::pair<double, double> normal2(std::uint64_t a, std::uint32_t b) const {
    const auto [u1, u2] = uniform2(a, b);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

 private:
  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  PhiloxKey key_;
  std::uint32_t stream_;
};

}  // namespace liouvlab
