#pragma once

#include <cstdint>
#include <random>

namespace routeworks {

// Seeded RNG with portable draw helpers. std::mt19937_64 is pinned by the
// standard, but the standard *distributions* are not bit-stable across
// library implementations, so the mappings below are done by hand.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // uniform double in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // uniform double in [lo, hi)
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // uniform integer in [lo, hi], inclusive
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(engine_() % span);
    }

    std::uint64_t raw() { return engine_(); }

    // Decorrelated child seed for stream `k` (SplitMix64 finalizer).
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t k) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (k + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace routeworks
