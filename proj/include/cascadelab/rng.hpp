#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace cascadelab {

// Deterministic randomness for the whole toolkit.
//
// All sampling goes through Rng, a xoshiro256++ generator seeded from a
// single 64-bit seed via the splitmix64 scrambler. Standard-library
// distributions are implementation-defined, so uniform/gaussian/shuffle are
// implemented here with fixed algorithms; identical seed + identical call
// sequence gives an identical stream on every platform.
//
// Parallel work never shares a stream: derive independent child seeds with
// derive_seed(seed, index) and recombine results in a fixed order.

using RngSeed = std::uint64_t;

namespace detail {
inline std::uint64_t splitmix64_scramble(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
inline std::uint64_t rotl64(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}
}  // namespace detail

/// Child seed for stream `index` of a parent seed. Distinct indices give
/// statistically independent streams.
inline RngSeed derive_seed(RngSeed seed, std::uint64_t index) {
    return detail::splitmix64_scramble(seed + 0x9E3779B97F4A7C15ULL * (index + 1));
}

class Rng {
public:
    explicit Rng(RngSeed seed) {
        // splitmix64 expansion of the seed into the xoshiro256++ state,
        // as recommended by the generator's authors.
        std::uint64_t sm = seed;
        for (auto& word : state_) {
            sm += 0x9E3779B97F4A7C15ULL;
            word = detail::splitmix64_scramble(sm);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl64(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl64(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Unbiased uniform integer in [0, n). n must be >= 1.
    std::uint64_t next_below(std::uint64_t n) {
        // Rejection sampling over the largest multiple of n.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return next_double() < p; }

    /// Standard normal via Box-Muller; caches the spare value.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Index drawn from an (unnormalized) nonnegative weight vector.
    std::size_t next_weighted(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = next_double() * total;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            u -= weights[i];
            if (u < 0.0) return i;
        }
        return weights.size() - 1;
    }

    /// In-place Fisher-Yates shuffle, descending index order.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Deterministic 64-bit digest of a feature vector (bit patterns of the
/// doubles, FNV-1a, then scrambled). Used where a pseudo-random but
/// input-determined value is needed.
inline std::uint64_t hash_features(const std::vector<double>& x) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (double v : x) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        __builtin_memcpy(&bits, &v, sizeof(bits));
        for (int shift = 0; shift < 64; shift += 8) {
            h ^= (bits >> shift) & 0xFF;
            h *= 0x100000001B3ULL;
        }
    }
    return detail::splitmix64_scramble(h);
}

}  // namespace cascadelab
