#pragma once

#include <cstdint>

namespace aoi {

/// Counter-based uniform generator. Every draw is a pure hash of
/// (seed, replication, ue, slot, stream), so a UE's randomness never
/// depends on scheduling decisions and common random numbers hold across
/// policies run with the same seed.
class CounterRng {
  public:
    enum Stream : std::uint64_t { kArrival = 1, kChannel = 2, kTieBreak = 3 };

    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    /// Uniform in [0, 1).
    double uniform(std::uint64_t replication, std::uint64_t ue, std::uint64_t slot,
                   Stream stream) const {
        std::uint64_t x = mix(seed_ + kGolden * (replication + 1));
        x = mix(x + kGolden * (ue + 1));
        x = mix(x + kGolden * slot);
        x = mix(x + kGolden * static_cast<std::uint64_t>(stream));
        return to_unit(x);
    }

    /// splitmix64 finalizer.
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static double to_unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

  private:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
    std::uint64_t seed_;
};

} // namespace aoi
