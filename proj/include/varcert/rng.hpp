#pragma once

#include <cmath>
#include <cstdint>

namespace varcert {

/// Deterministic xoshiro256++ generator, seeded through splitmix64.
/// Produces identical streams on every platform for a given seed, which the
/// byte-identical output requirements depend on. std::mt19937 would be
/// reproducible too, but the distributions on top of it are not portable.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        // splitmix64 expansion of the seed into the four state words.
        std::uint64_t x = seed;
        for (auto& w : s_) {
            x += 0x9e3779b97f4a7c15ull;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            w = z ^ (z >> 31);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection-free modulo is fine here: n is tiny relative to 2^64 in
        // all callers, so the bias is far below double resolution.
        return next_u64() % n;
    }

    /// Standard normal via Box-Muller (no cached spare, to keep the
    /// consumption pattern independent of call history).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

private:
    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }
    std::uint64_t s_[4];
};

} // namespace varcert
