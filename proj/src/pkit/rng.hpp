#pragma once

#include <cstdint>

namespace pkit {

// Deterministic counter-style generator (splitmix64). The standard <random>
// distributions are implementation-defined, so every sampling decision in the
// pipeline goes through this instead; outputs are identical on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // Named stream derivation: independent per-record generators so parallel
    // schedules cannot change sampling results.
    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        Rng r(seed ^ (0x9e3779b97f4a7c15ull * (stream + 1)));
        r.next_u64();
        return r;
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // [0, bound); bound > 0. Multiply-shift reduction.
    std::uint64_t bounded(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    // Inclusive [lo, hi].
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(bounded(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    // [0, 1)
    double uniform_real() {
        return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    // Standard normal via Box-Muller.
    double normal();

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace pkit
