#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace mma {

/// SplitMix64. Chosen over <random> engines because its output is fully
/// determined by three constants, so sequences are identical everywhere.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, bound). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
};

/// First SplitMix64 output for the given state.
inline std::uint64_t splitmix64(std::uint64_t x) { return SplitMix64(x).next(); }

/// Purpose constants for independent sub-streams (ASCII tags).
enum class Stream : std::uint64_t {
  kObservations = 0x6F62736572766174ULL,  // "observat"
  kPredictions = 0x7072656469637469ULL,   // "predicti"
  kMenuShuffle = 0x6D656E7573687566ULL,   // "menushuf"
  kDistractors = 0x6469737472616374ULL,   // "distract"
  kSession = 0x73657373696F6E73ULL,       // "sessions"
  kBot = 0x626F747365656473ULL,           // "botseeds"
};

inline std::uint64_t stream_seed(std::uint64_t seed, Stream purpose) {
  return splitmix64(seed ^ static_cast<std::uint64_t>(purpose));
}

inline SplitMix64 make_stream(std::uint64_t seed, Stream purpose) {
  return SplitMix64(stream_seed(seed, purpose));
}

/// Combines two seeds into one, order-sensitive.
inline std::uint64_t mix_seeds(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

}  // namespace mma
