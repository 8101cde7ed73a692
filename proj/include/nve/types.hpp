#pragma once

#include <cstdint>
#include <vector>

namespace nve {

using ClientId = std::uint64_t;
using Cycle = std::uint64_t;
using Nonce = std::uint64_t;
using Bytes = std::vector<std::uint8_t>;

// Deterministic splitmix64 generator. Every random choice in the simulator
// flows through an explicitly seeded instance, so a (scenario, seed) pair
// replays bit-identically regardless of platform or thread count.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n); returns 0 when n == 0.
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Independent stream derived from a base seed and a salt.
    static Rng derive(std::uint64_t seed, std::uint64_t salt) {
        Rng mixer(seed ^ (salt * 0x9e3779b97f4a7c15ULL + 0x6a09e667f3bcc909ULL));
        return Rng(mixer.next_u64());
    }

private:
    std::uint64_t state_;
};

} // namespace nve
