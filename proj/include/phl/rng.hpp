#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace phl {

/// Independent noise channels of one replication.
enum class Stream : std::uint64_t {
  Process = 1,
  Measurement = 2,
  Input = 3,
  Innovation = 4,
};

/// Offset separating evaluation rollouts from training data.
inline constexpr std::uint64_t kEvalSeedOffset = 1'000'000'000ULL;

/// Standard normal draws for one (seed, stream) pair. Each pair owns its own
/// engine, so the order in which streams are consumed never matters.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, Stream stream);

  double next() { return dist_(engine_); }
  void fill(std::span<double> out) {
    for (double& v : out) v = dist_(engine_);
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_;
};

}  // namespace phl
