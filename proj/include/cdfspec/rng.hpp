#pragma once

// Reproducible random streams.
//
// Every stream is a std::mt19937_64 engine (bit-exact across standard
// libraries) seeded from a SplitMix64 hash of (master seed, stream index).
// Uniform doubles take the top 53 bits of one engine output; integer draws
// use rejection sampling; normals use the Marsaglia polar method. None of
// the <random> distributions are used, since their algorithms are
// implementation-defined.

#include <cmath>
#include <cstdint>
#include <random>

namespace cdfspec {

/// SplitMix64 finalizer. A bijection on 64-bit words.
[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of sub-stream `index` under `master`. Injective in `index` for a
/// fixed master: the odd multiplier makes the pre-image injective mod 2^64
/// and splitmix64 is a bijection.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return splitmix64(master + 0xd1b54a32d192ed03ULL * (index + 1));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    [[nodiscard]] std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1).
    [[nodiscard]] double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer on [0, bound). bound must be positive.
    [[nodiscard]] std::uint64_t uniform_index(std::uint64_t bound) {
        // Draws below 2^64 mod bound would bias the low residues.
        const std::uint64_t threshold = (std::uint64_t{0} - bound) % bound;
        std::uint64_t draw = engine_();
        while (draw < threshold) {
            draw = engine_();
        }
        return draw % bound;
    }

    /// Standard normal variate.
    [[nodiscard]] double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        double v = 0.0;
        double s = 0.0;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double factor = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * factor;
        has_spare_ = true;
        return u * factor;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace cdfspec
