#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace pvalfn {

/// SplitMix64 finalizer: a bijective 64-bit mixing function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Key of the stream for replicate `index` under `base_seed`.
constexpr std::uint64_t replicate_key(std::uint64_t base_seed, std::uint64_t index) noexcept {
  return mix64(mix64(base_seed + 0x9e3779b97f4a7c15ULL) ^ (index * 0xd1b54a32d192ed03ULL + 1));
}

/// Counter-based generator: the stream for (base_seed, index) is a pure
/// function of those two values, so replicates can be generated in any order
/// or on any thread and still reproduce bit-for-bit.
class ReplicateRng {
 public:
  ReplicateRng(std::uint64_t base_seed, std::uint64_t index) noexcept
      : state_(replicate_key(base_seed, index)) {}

  std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double t = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  /// Unit-mean exponential.
  double exponential() noexcept { return -std::log(uniform()); }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pvalfn
