#pragma once

#include <cstdint>

namespace driftnet {

// Seeded, splittable random source (xoshiro256++ behind a splitmix64 seeding
// chain). The same (seed, stream) pair always reproduces the same sequence,
// and distinct stream ids give statistically independent sequences. One
// instance per consumer; never share across threads.
class RandomSource {
public:
    RandomSource() : RandomSource(0, 0) {}
    RandomSource(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1).
    double uniform();

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_below(std::uint64_t n);

    /// Gaussian draw, Box-Muller with one cached deviate.
    double normal(double mean = 0.0, double stddev = 1.0);

    /// Child source on an independent stream derived from (this stream, purpose).
    RandomSource derive(std::uint64_t purpose) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t state_[4];
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

/// Order-dependent combiner for building stream ids from run coordinates.
std::uint64_t mix_stream(std::uint64_t a, std::uint64_t b);

}  // namespace driftnet
