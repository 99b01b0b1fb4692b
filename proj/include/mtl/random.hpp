#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace mtl {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A stream is
/// fully determined by its 64-bit key; the counter advances per draw, so
/// independent streams are obtained by hashing stream coordinates into keys.
class Philox {
 public:
  using result_type = std::uint64_t;
  static constexpr const char* name = "philox4x32-10";

  explicit Philox(std::uint64_t key) : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (cursor_ == 2) {
      block_ = generate(counter_++);
      cursor_ = 0;
    }
    const auto i = 2 * cursor_++;
    return (static_cast<std::uint64_t>(block_[i]) << 32) | block_[i + 1];
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the sine branch is kept for the next call.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

 private:
  using Block = std::array<std::uint32_t, 4>;

  Block generate(std::uint64_t count) const {
    Block ctr{static_cast<std::uint32_t>(count), static_cast<std::uint32_t>(count >> 32), 0u, 0u};
    std::array<std::uint32_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return ctr;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t counter_ = 0;
  Block block_{};
  int cursor_ = 2;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Key for the stream identified by (seed, a, b), e.g. (seed, n, replication).
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

}  // namespace mtl
