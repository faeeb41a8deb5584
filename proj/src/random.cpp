#include "mma/random.hpp"

namespace mma {

std::uint64_t SplitMix64::below(std::uint64_t bound) {
  if (bound <= 1) return 0;
  // 2^64 mod bound; draws under this threshold would bias the low residues.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t x = next();
    if (x >= threshold) return x % bound;
  }
}

}  // namespace mma
