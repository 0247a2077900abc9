#pragma once

#include <cstdint>
#include <random>

namespace cmpcurve {

using Stream = std::mt19937_64;

// Purposes for which independent streams are derived from one master seed.
enum class StreamTag : std::uint64_t {
    Split = 0x5350,
    Perturb = 0x5045,
    SimData = 0x5344,
    SimAnalysis = 0x5341,
    Truth = 0x5452,
    Generic = 0x4745,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the stream identified by (seed, tag, index). Streams for different
/// indices are reproducible independently of the order they are created in.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag, std::uint64_t index = 0) noexcept {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
    return splitmix64(h ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Stream derive_stream(std::uint64_t seed, StreamTag tag, std::uint64_t index = 0) {
    return Stream(derive_seed(seed, tag, index));
}

}  // namespace cmpcurve
