#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace sctmle {

// Counter-derived random streams built on xoshiro256++ with splitmix64
// key mixing. A stream is identified by a 64-bit digest; child streams are
// derived by mixing a tag into the digest, so (base seed, replication,
// purpose) always maps to the same stream no matter which worker asks
// for it or in what order.
class RngStream {
 public:
  RngStream() : RngStream(UINT64_C(0x9e3779b97f4a7c15)) {}

  explicit RngStream(std::uint64_t seed) : digest_(mix(seed)) { reset_state(); }

  // Derive an independent stream keyed by (this stream, tag). Does not
  // consume any of this stream's output.
  [[nodiscard]] RngStream child(std::uint64_t tag) const {
    return RngStream(from_digest{}, mix(digest_ ^ mix(tag)));
  }

  [[nodiscard]] RngStream child(std::string_view tag) const {
    return child(fnv1a(tag));
  }

  std::uint64_t next_u64() {
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

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; two uniforms per draw, no cached state.
  double normal() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Unbiased integer on [lo, hi], both inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(next_u64());  // full span
    const std::uint64_t reject_below = (0 - range) % range;  // 2^64 mod range
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x < reject_below);
    return lo + static_cast<std::int64_t>(x % range);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  [[nodiscard]] std::uint64_t digest() const { return digest_; }

 private:
  struct from_digest {};
  RngStream(from_digest, std::uint64_t digest) : digest_(digest) {
    reset_state();
  }

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  // splitmix64 finalizer; full-avalanche 64-bit mixing.
  static std::uint64_t mix(std::uint64_t z) {
    z += UINT64_C(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)) * UINT64_C(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)) * UINT64_C(0x94d049bb133111eb);
    return z ^ (z >> 31);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = UINT64_C(0xcbf29ce484222325);
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= UINT64_C(0x100000001b3);
    }
    return h;
  }

  void reset_state() {
    // Seed the xoshiro state from the digest via a splitmix64 sequence.
    std::uint64_t x = digest_;
    bool any = false;
    for (auto& w : s_) {
      x += UINT64_C(0x9e3779b97f4a7c15);
      w = mix(x);
      any = any || (w != 0);
    }
    if (!any) s_[0] = 1;  // all-zero state is invalid for xoshiro
  }

  std::uint64_t digest_;
  std::uint64_t s_[4];
};

}  // namespace sctmle
