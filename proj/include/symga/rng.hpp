#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace symga {

/// SplitMix64 finalizer. Bijective 64-bit mixing function with good
/// avalanche properties; used only to derive seeds for child streams.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic seed derivation for the stream tree:
///   master seed -> per-trial seed (tag = trial index)
///   trial seed  -> environment stream (tag 0), agent i stream (tag i + 1).
/// Both arguments are mixed so nearby tags give unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) {
  return mix64(parent ^ mix64(tag ^ 0x6a09e667f3bcc909ULL));
}

/// Seeded random stream with fully pinned sampling rules. Every draw is a
/// fixed function of the mt19937_64 word sequence (which the C++ standard
/// specifies exactly), so identical seeds reproduce identical trajectories
/// byte for byte on any platform.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n), n >= 1, via 128-bit multiply-shift.
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(eng_()) * n) >> 64);
  }

  int uniform_int(int n) { return static_cast<int>(uniform_index(n)); }

  /// Draw from a finite distribution by inverse-CDF walk. The row is assumed
  /// nonnegative with sum 1 up to rounding; the last index absorbs any
  /// leftover mass so the draw always lands.
  int sample(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
      acc += probs[k];
      if (u < acc) return static_cast<int>(k);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace symga
