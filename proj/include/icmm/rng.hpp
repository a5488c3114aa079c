#pragma once

#include <cmath>
#include <cstdint>

#include "icmm/common.hpp"

namespace icmm {

// Counter-based uniform generator: the output at step n is the SplitMix64
// finalizer applied to a (seed, stream)-keyed counter. Distinct stream ids on
// the same seed give independent sequences, so parallel chains and the
// prior-sampling pass never share state. Same (seed, stream) -> identical
// sequence on every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream), base_(derive_base(seed, stream)), counter_(0) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64() {
    std::uint64_t z = base_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on the open interval (0, 1); never returns an exact endpoint.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t derive_base(std::uint64_t seed, std::uint64_t stream) {
    const std::uint64_t h1 = mix(seed + 0x9E3779B97F4A7C15ULL);
    const std::uint64_t h2 = mix(stream + 0xD1B54A32D192ED03ULL);
    return mix(h1 ^ (h2 + 0x9E3779B97F4A7C15ULL));
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t base_;
  std::uint64_t counter_;
};

}  // namespace icmm
