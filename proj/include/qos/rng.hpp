#pragma once

#include <cstdint>
#include <string_view>

namespace qos {

/// PCG32 (XSH-RR output, 64-bit LCG state). Reference: O'Neill, pcg-random.org.
/// Streams are reproducible across languages given the same seed.
class Pcg32 {
public:
    static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
    static constexpr std::uint64_t kIncrement = 1442695040888963407ULL;

    explicit Pcg32(std::uint64_t seed) noexcept {
        state_ = 0;
        next_u32();
        state_ += seed;
        next_u32();
    }

    std::uint32_t next_u32() noexcept {
        const std::uint64_t old = state_;
        state_ = old * kMultiplier + kIncrement;
        const auto xorshifted = static_cast<std::uint32_t>(((old >> 18U) ^ old) >> 27U);
        const auto rot = static_cast<std::uint32_t>(old >> 59U);
        return (xorshifted >> rot) | (xorshifted << ((32U - rot) & 31U));
    }

    /// Unbiased draw in [0, bound) by rejection; bound must be > 0.
    std::uint32_t bounded(std::uint32_t bound) noexcept {
        const std::uint32_t threshold = (0U - bound) % bound;
        for (;;) {
            const std::uint32_t r = next_u32();
            if (r >= threshold) return r % bound;
        }
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() noexcept {
        const std::uint64_t hi = next_u32() >> 5U;  // 27 bits
        const std::uint64_t lo = next_u32() >> 6U;  // 26 bits
        return static_cast<double>((hi << 26U) | lo) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

private:
    std::uint64_t state_;
};

/// SplitMix64 finalizer; used to derive independent seeds from tuples.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30U)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27U)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31U);
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a) noexcept {
    return splitmix64(splitmix64(seed) ^ a);
}

/// FNV-1a 64-bit, streamable.
class Fnv1a64 {
public:
    static constexpr std::uint64_t kOffset = 14695981039346656037ULL;
    static constexpr std::uint64_t kPrime = 1099511628211ULL;

    void update(const void* data, std::size_t n) noexcept {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= kPrime;
        }
    }
    void update(std::string_view s) noexcept { update(s.data(), s.size()); }
    std::uint64_t digest() const noexcept { return h_; }

private:
    std::uint64_t h_ = kOffset;
};

inline std::uint64_t fnv1a64(std::string_view s) noexcept {
    Fnv1a64 h;
    h.update(s);
    return h.digest();
}

}  // namespace qos
