#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace vlab {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// Output is a pure function of (key, counter), so a Monte Carlo path can be
/// regenerated from its (seed, path index, stream, block) coordinates alone,
/// independently of thread scheduling or evaluation order.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Counter single_round(const Counter& c, const Key& k) noexcept {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Standard normal draws addressed by (seed, path, stream, index).
///
/// Index i lives in Philox block i/4; each block yields four uniforms which
/// Box-Muller turns into four normals.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t path, std::uint32_t stream) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        path_(path),
        stream_(stream) {}

  /// Four normals of block `block`.
  std::array<double, 4> block(std::uint32_t block) const noexcept {
    const Philox4x32::Counter ctr{block, stream_, static_cast<std::uint32_t>(path_),
                                  static_cast<std::uint32_t>(path_ >> 32)};
    const auto bits = Philox4x32::generate(ctr, key_);
    std::array<double, 4> out{};
    for (int pair = 0; pair < 2; ++pair) {
      const double u1 = to_unit(bits[2 * pair]);
      const double u2 = to_unit(bits[2 * pair + 1]);
      const double radius = std::sqrt(-2.0 * std::log(u1));
      const double angle = 2.0 * std::numbers::pi * u2;
      out[2 * pair] = radius * std::cos(angle);
      out[2 * pair + 1] = radius * std::sin(angle);
    }
    return out;
  }

  double at(std::uint64_t index) const noexcept {
    return block(static_cast<std::uint32_t>(index / 4))[index % 4];
  }

  /// Fills `out` with draws index0, index0+1, ...
  void fill(std::uint64_t index0, std::span<double> out) const noexcept {
    std::size_t k = 0;
    std::uint64_t idx = index0;
    while (k < out.size()) {
      const auto b = block(static_cast<std::uint32_t>(idx / 4));
      for (std::size_t lane = idx % 4; lane < 4 && k < out.size(); ++lane, ++k, ++idx) {
        out[k] = b[lane];
      }
    }
  }

 private:
  // Maps to the open interval (0,1) so log(u) is finite.
  static double to_unit(std::uint32_t x) noexcept {
    return (static_cast<double>(x) + 0.5) * 0x1.0p-32;
  }

  Philox4x32::Key key_;
  std::uint64_t path_;
  std::uint32_t stream_;
};

// Stream identifiers, so different consumers of one (seed, path) never overlap.
namespace streams {
inline constexpr std::uint32_t kBrownian = 1;
inline constexpr std::uint32_t kFbmCholesky = 2;
inline constexpr std::uint32_t kFbmCirculant = 3;
inline constexpr std::uint32_t kInitialCondition = 4;
}  // namespace streams

}  // namespace vlab
