#pragma once

#include <cstdint>

namespace blockevo {

// Deterministic 64-bit generator (splitmix64). We avoid std::uniform_*
// distributions on purpose: their output is implementation-defined, and
// traces must be bit-identical across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n) { return next() % n; }

    // Uniform integer in [lo, hi] inclusive.
    int64_t intIn(int64_t lo, int64_t hi) {
        if (hi <= lo) return lo;
        return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    // Uniform double in [0, 1).
    double unit() { return (next() >> 11) * (1.0 / 9007199254740992.0); }

    double realIn(double lo, double hi) { return lo + (hi - lo) * unit(); }

    bool chance(double p) { return unit() < p; }

    // Derive an independent stream; used to split per-test / per-individual
    // seeds so that parallel evaluation cannot change results.
    uint64_t fork() { return next(); }

    uint64_t state() const { return state_; }

private:
    uint64_t state_;
};

} // namespace blockevo
