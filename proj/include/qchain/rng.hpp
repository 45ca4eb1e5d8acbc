#pragma once

#include <cstdint>

namespace qchain {

/// SplitMix64 finalizer; full-period 64-bit mix.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Small counter-based generator. Streams are cheap to construct, so each
/// Monte Carlo sample index gets its own independent stream and estimates are
/// reproducible regardless of thread count.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform double strictly inside (0, 1); safe under log().
    double uniform01() {
        return (static_cast<double>(next() >> 11) + 0.5) *
               (1.0 / 9007199254740992.0);
    }

private:
    std::uint64_t state_;
};

/// Independent stream for (seed, index); index 0 differs from plain Rng(seed).
inline Rng stream_for(std::uint64_t seed, std::uint64_t index) {
    return Rng(mix64(seed ^ mix64(index + 0x51ed2701ab7c63a5ULL)));
}

/// Geometric attempt count N >= 1 with P(N) = p (1-p)^(N-1), by inversion.
std::uint64_t sample_geometric(double p, Rng& rng);

}  // namespace qchain
