#pragma once

#include <cstdint>
#include <random>

namespace netshift {

/// Stream tags so that different consumers of one seed never share draws.
enum class StreamTag : std::uint32_t {
    Eta = 1,
    Simulation = 2,
    Graph = 3,
    Burnin = 4,
};

/// Independent generator for (seed, index, tag).
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index, StreamTag tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      static_cast<std::uint32_t>(tag)};
    return std::mt19937_64(seq);
}

} // namespace netshift
