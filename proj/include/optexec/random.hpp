#pragma once

#include <cstdint>
#include <random>

namespace optexec {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent sub-seed for stream `stream` of a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

enum class Stream : std::uint64_t { Regime = 1, Diffusion = 2, Jumps = 3 };

inline Rng make_stream(std::uint64_t seed, Stream stream) {
    return Rng(derive_seed(seed, static_cast<std::uint64_t>(stream)));
}

}  // namespace optexec
