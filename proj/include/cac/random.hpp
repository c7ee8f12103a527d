#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace cac {

/// Named substreams. Each (seed, cell, purpose) triple owns an independent
/// generator so that draws for one purpose never shift another's sequence.
enum class StreamPurpose : std::uint32_t { arrivals = 1, mobility = 2, reinjection = 3 };

/// mt19937_64 with hand-rolled variate transforms: the engine output is fixed
/// by the standard, and so are these, which keeps runs bit-identical across
/// standard library implementations.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint32_t cell, StreamPurpose purpose) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          cell, static_cast<std::uint32_t>(purpose)};
        engine_.seed(seq);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Exponential with the given rate; +inf when the rate is zero.
    double exponential(double rate) {
        if (rate <= 0.0) return std::numeric_limits<double>::infinity();
        return -std::log1p(-uniform()) / rate;
    }

    /// Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace cac
