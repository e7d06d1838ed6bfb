#pragma once

// Counter-keyed random streams. Each (seed, stream, substream) triple opens an
// independent deterministic sequence, so parallel and serial generation draw
// identical values. splitmix64 mixing; Box-Muller for gaussians.

#include <cmath>
#include <cstdint>

namespace lawline {

class CounterRng {
public:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static CounterRng keyed(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) {
        CounterRng rng;
        rng.state_ = mix(mix(mix(seed) ^ stream * 0xd1342543de82ef95ULL) ^
                         substream * 0xaf251af3b0f025b5ULL);
        return rng;
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in (0, 1); never returns exactly 0 so logs stay finite.
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    /// Standard normal. Consumes two uniforms per call; no cached state.
    double next_gaussian() {
        const double u1 = next_unit();
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Uniform integer in [0, n) via multiply-shift.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

private:
    std::uint64_t state_ = 0;
};

} // namespace lawline
