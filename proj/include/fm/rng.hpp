#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace fm {

// The single seeded generator used everywhere in this project. Every
// stochastic operation takes an explicit 64-bit seed and builds one of
// these, so results are bit-reproducible across platforms and runs.
//
// Algorithm (fixed, do not change without bumping checkpoint formats):
//   * state: xoshiro256** (Blackman & Vigna), seeded by expanding the
//     64-bit seed with four rounds of splitmix64
//   * uniform():      (next_u64() >> 11) * 2^-53, in [0, 1)
//   * uniform_int(n): Lemire multiply-shift with rejection (unbiased)
//   * normal():       Box-Muller on two uniforms; the second variate of
//                     each pair is discarded (no cached spare)
//   * shuffle():      Fisher-Yates, i from n-1 down to 1, j = uniform_int(i+1)
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_)
            word = splitmix64(x);
    }

    // Deterministic derivation of sub-stream seeds, e.g. per fold, per
    // epoch, per trial: mix(seed, k) for distinct small k.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
        return splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t uniform_int(std::uint64_t bound) {
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Standard normal via Box-Muller; one fresh pair per call.
    double normal() {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    // Normal(0, stddev) re-drawn until |x| <= 2*stddev.
    double truncated_normal(double stddev) {
        for (;;) {
            const double x = normal() * stddev;
            if (std::abs(x) <= 2.0 * stddev)
                return x;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static constexpr double kPi = 3.14159265358979323846;

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

} // namespace fm
