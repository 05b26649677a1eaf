#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace reflecsched {

// Seeded random stream. Range reduction is done here rather than through
// <random> distributions, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    // Uniform index in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n);

    // Uniform double in [0, 1) with 53 bits of precision.
    double uniform01();

    // Child stream keyed by `stream`. Depends only on this stream's seed, not
    // on how many values have been drawn, so forks are stable under reordering.
    Rng fork(std::uint64_t stream) const { return Rng(derive(seed_, stream)); }

    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace reflecsched
