#include "phl/rng.hpp"

namespace phl {

NormalStream::NormalStream(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5eedU};
  engine_.seed(seq);
}

}  // namespace phl
