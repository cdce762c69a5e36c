#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace invkern {

// Counter-based RNG: every variate is a pure function of (seed, stream, counter),
// so parallel evaluation order cannot change results.
namespace rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Distinct streams keep point coordinates, label noise, and MC samples decoupled.
inline constexpr std::uint64_t stream_points = 0x706f696e7473ULL;
inline constexpr std::uint64_t stream_noise = 0x6e6f697365ULL;
inline constexpr std::uint64_t stream_mc = 0x6d63ULL;

inline std::uint64_t word(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return mix64(mix64(seed ^ mix64(stream)) + counter);
}

// Uniform in (0,1); offset by half an ulp of the 53-bit grid so log() is safe.
inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return (static_cast<double>(word(seed, stream, counter) >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal via Box-Muller on counters (2c, 2c+1); one variate per counter.
inline double gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    double u1 = uniform(seed, stream, 2 * counter);
    double u2 = uniform(seed, stream, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rng
}  // namespace invkern
